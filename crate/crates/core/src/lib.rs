//! Cost-aware assignment of queries to priced LLMs.
//!
//! The pipeline: an ensemble of bootstrapped random forests estimates, per
//! query and LLM, the probability of a correct answer; a destruction and
//! reconstruction search over assignments then builds a set of mutually
//! non-dominated (cost, accuracy) trade-offs. An NSGA-II baseline and exact
//! reference fronts are provided for comparison.

pub mod archive_io;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod featurize;
pub mod forest;
pub mod metrics;
pub mod model;
pub mod nsga2;
pub mod optimizer;
pub mod prediction;

pub use error::{Error, Result};
pub use model::{
    dominates, evaluate, evaluate_assignment, CostMatrix, LabelMatrix, LlmCandidate, Matrix,
    ObjectivePoint, PredictionMatrix, Query, Solution, SolutionArchive,
};
