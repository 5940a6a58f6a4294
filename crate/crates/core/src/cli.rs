//! Command-line pipeline: each subcommand runs one stage and writes its artifact.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::archive_io::{
    ArchiveDocument, PredictionDocument, ReferenceDocument, RunMetadata, Timing,
};
use crate::dataset::{split_dataset, synth_instance, Dataset, SplitSpec, SynthParams};
use crate::error::{Error, Result};
use crate::featurize::DEFAULT_DIM;
use crate::metrics::{
    brute_force_front, delta_spread, igd, incremental_front, DEFAULT_ENUMERATION_CAP,
};
use crate::model::{ObjectivePoint, SolutionArchive};
use crate::nsga2::{nsga2, GaConfig};
use crate::optimizer::{optimize, threshold_assignment, SearchConfig};
use crate::prediction::{
    train_ensemble, EnsembleConfig, EnsembleModel, FeaturizerConfig, LabeledSet,
};

#[derive(Debug, Parser)]
#[command(
    name = "llm-assign",
    version,
    about = "Cost-aware assignment of queries to LLMs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Split a dataset and train the correctness predictor.
    Train(TrainArgs),
    /// Predict correctness probabilities for the held-out queries.
    Predict(PredictArgs),
    /// Search for cost/accuracy trade-offs from predictions.
    Optimize(OptimizeArgs),
    /// Run the NSGA-II baseline on the same predictions.
    Nsga2(Nsga2Args),
    /// Compute a reference front from the true labels.
    Oracle(OracleArgs),
    /// Score an archive against a reference front.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub price_spread: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub difficulty_correlation: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0.01)]
    pub val_frac: f64,
    /// Number of bootstrap samples.
    #[arg(long, default_value_t = 100)]
    pub u: usize,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long)]
    pub seed: u64,
    /// Hashed feature dimension for datasets without a feature table.
    #[arg(long, default_value_t = DEFAULT_DIM)]
    pub hash_dim: usize,
    #[arg(long)]
    pub model_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Predict every query instead of the model's test split.
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub gn: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Emit only the threshold assignment (cheapest LLM with p >= threshold).
    #[arg(long)]
    pub prediction_only: bool,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Nsga2Args {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub pop: usize,
    #[arg(long, default_value_t = 200)]
    pub gens: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.9)]
    pub crossover_rate: f64,
    /// Per-gene mutation probability; defaults to 1/n.
    #[arg(long)]
    pub mutation_rate: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleMode {
    Brute,
    Incremental,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub mode: OracleMode,
    /// Restrict the front to the queries covered by this prediction file.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Optimize(a) => run_optimize(a),
        Command::Nsga2(a) => run_nsga2(a),
        Command::Oracle(a) => oracle(a),
        Command::Evaluate(a) => evaluate(a, out),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let ds = synth_instance(&SynthParams {
        n: a.n,
        m: a.m,
        seed: a.seed,
        price_spread: a.price_spread,
        difficulty_correlation: a.difficulty_correlation,
    })?;
    ds.write_dir(&a.out)
}

fn featurizer_for(ds: &Dataset, hash_dim: usize) -> Result<FeaturizerConfig> {
    match ds.feature_dim() {
        Some(dim) => Ok(FeaturizerConfig::Precomputed { dim }),
        None if hash_dim > 0 => Ok(FeaturizerConfig::Hashing { dim: hash_dim }),
        None => Err(Error::InvalidParameter(
            "hash dimension must be positive".into(),
        )),
    }
}

fn labeled_set(ds: &Dataset, ids: &[usize], featurizer: &FeaturizerConfig) -> Result<LabeledSet> {
    let features = ids
        .iter()
        .map(|&i| featurizer.features_for(&ds.queries[i]))
        .collect::<Result<Vec<_>>>()?;
    LabeledSet::new(features, ds.labels.select_rows(ids).into_inner())
}

fn train(a: TrainArgs) -> Result<()> {
    let ds = Dataset::load_dir(&a.data)?;
    let split = split_dataset(
        ds.n(),
        &SplitSpec {
            train_fraction: a.train_frac,
            val_fraction: a.val_frac,
            seed: a.seed,
        },
    )?;
    let featurizer = featurizer_for(&ds, a.hash_dim)?;
    let train_set = labeled_set(&ds, &split.train, &featurizer)?;
    let val_set = labeled_set(&ds, &split.val, &featurizer)?;
    let config = EnsembleConfig {
        samples: a.u,
        alpha: a.alpha,
        ..EnsembleConfig::default()
    };
    let model = train_ensemble(&train_set, &val_set, featurizer, &config, a.seed)?;
    model.save(&a.model_out, Some(&split))
}

fn predict(a: PredictArgs) -> Result<()> {
    let ds = Dataset::load_dir(&a.data)?;
    let (model, split) = EnsembleModel::load(&a.model)?;
    if model.llm_count() != ds.m() {
        return Err(Error::Shape(format!(
            "model predicts {} LLMs, dataset has {}",
            model.llm_count(),
            ds.m()
        )));
    }
    let ids: Vec<usize> = match split {
        Some(s) if !a.all => s.test,
        _ => (0..ds.n()).collect(),
    };
    if ids.iter().any(|&i| i >= ds.n()) {
        return Err(Error::InvalidInput(
            "model split refers to queries outside the dataset".into(),
        ));
    }
    let queries: Vec<_> = ids.iter().map(|&i| ds.queries[i].clone()).collect();
    let values = model.build_prediction_matrix(&queries)?;
    PredictionDocument::new(ids, values)?.write(&a.out)
}

/// The dataset rows covered by a prediction file, checked for consistency.
fn prediction_subset(data: &Path, predictions: &Path) -> Result<(Dataset, PredictionDocument)> {
    let ds = Dataset::load_dir(data)?;
    let preds = PredictionDocument::read(predictions)?;
    if preds.values.cols() != ds.m() {
        return Err(Error::Shape(format!(
            "predictions cover {} LLMs, dataset has {}",
            preds.values.cols(),
            ds.m()
        )));
    }
    let sub = ds.subset(&preds.query_ids)?;
    Ok((sub, preds))
}

fn write_archive(
    archive: &SolutionArchive,
    metadata: RunMetadata,
    ds: &Dataset,
    out: &Path,
    started: Instant,
) -> Result<()> {
    let wall_seconds = started.elapsed().as_secs_f64();
    let costs = ds.cost_matrix()?;
    let doc = ArchiveDocument::from_archive(archive, metadata, &costs, Some(&*ds.labels))?;
    doc.write(out)?;
    Timing { wall_seconds }.write(out)
}

fn run_optimize(a: OptimizeArgs) -> Result<()> {
    let (ds, preds) = prediction_subset(&a.data, &a.predictions)?;
    let costs = ds.cost_matrix()?;
    let started = Instant::now();
    let (archive, algorithm, config) = if a.prediction_only {
        let mut archive = SolutionArchive::new();
        archive.insert(threshold_assignment(&preds.values, &costs, a.threshold)?);
        (archive, "threshold", json!({ "threshold": a.threshold }))
    } else {
        let config = SearchConfig {
            grid_n: a.gn,
            max_iterations: a.max_iters,
            ..SearchConfig::default()
        };
        let archive = optimize(&preds.values, &costs, &config)?;
        (
            archive,
            "optllm",
            json!({ "grid_n": a.gn, "max_iterations": a.max_iters }),
        )
    };
    let meta = RunMetadata::new(algorithm, None, config, preds.query_ids.clone(), ds.m());
    write_archive(&archive, meta, &ds, &a.out, started)
}

fn run_nsga2(a: Nsga2Args) -> Result<()> {
    let (ds, preds) = prediction_subset(&a.data, &a.predictions)?;
    let costs = ds.cost_matrix()?;
    let config = GaConfig {
        population_size: a.pop,
        generations: a.gens,
        crossover_rate: a.crossover_rate,
        mutation_rate: a.mutation_rate,
        seed: a.seed,
        ..GaConfig::default()
    };
    let started = Instant::now();
    let archive = nsga2(&preds.values, &costs, &config)?;
    let meta = RunMetadata::new(
        "nsga2",
        Some(a.seed),
        serde_json::to_value(&config).expect("config serializes"),
        preds.query_ids.clone(),
        ds.m(),
    );
    write_archive(&archive, meta, &ds, &a.out, started)
}

fn oracle(a: OracleArgs) -> Result<()> {
    let (ds, ids) = match &a.predictions {
        Some(p) => {
            let (ds, preds) = prediction_subset(&a.data, p)?;
            (ds, preds.query_ids)
        }
        None => {
            let ds = Dataset::load_dir(&a.data)?;
            let ids = (0..ds.n()).collect();
            (ds, ids)
        }
    };
    let costs = ds.cost_matrix()?;
    let front = match a.mode {
        OracleMode::Brute => brute_force_front(&costs, &ds.labels, a.cap)?,
        OracleMode::Incremental => incremental_front(&costs, &ds.labels)?,
    };
    ReferenceDocument::new(ids, &front).write(&a.out)
}

fn fmt_point(p: Option<&ObjectivePoint>) -> String {
    match p {
        Some(p) => format!("cost={} accuracy={}", p.cost, p.accuracy),
        None => "n/a".into(),
    }
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let archive = ArchiveDocument::read(&a.archive)?;
    let reference = ReferenceDocument::read(&a.reference)?;
    if archive.metadata.query_ids != reference.query_ids {
        return Err(Error::InvalidInput(
            "archive and reference cover different queries".into(),
        ));
    }
    let (points, basis) = match archive.true_points() {
        Some(p) => (p, "true"),
        None => (archive.predicted_points(), "predicted"),
    };
    let front = reference.front();
    let igd_value = igd(&points, &front)?;
    let spread = match delta_spread(&points, &front) {
        Ok(v) => v.to_string(),
        Err(_) => "n/a".into(),
    };
    let min_cost = points.iter().min_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then(b.accuracy.total_cmp(&a.accuracy))
    });
    let max_acc = points.iter().max_by(|a, b| {
        a.accuracy
            .total_cmp(&b.accuracy)
            .then(b.cost.total_cmp(&a.cost))
    });
    let wall = match Timing::read(&a.archive)? {
        Some(t) => t.wall_seconds.to_string(),
        None => "n/a".into(),
    };
    let io = |e| Error::io("<stdout>", e);
    writeln!(out, "objectives: {basis}").map_err(io)?;
    writeln!(out, "solutions: {}", points.len()).map_err(io)?;
    writeln!(out, "igd: {igd_value}").map_err(io)?;
    writeln!(out, "spread: {spread}").map_err(io)?;
    writeln!(out, "min_cost: {}", fmt_point(min_cost)).map_err(io)?;
    writeln!(out, "max_accuracy: {}", fmt_point(max_acc)).map_err(io)?;
    writeln!(
        out,
        "reference_min_cost: {}",
        fmt_point(front.min_cost().as_ref())
    )
    .map_err(io)?;
    writeln!(
        out,
        "reference_max_accuracy: {}",
        fmt_point(front.max_accuracy().as_ref())
    )
    .map_err(io)?;
    writeln!(out, "wall_seconds: {wall}").map_err(io)?;
    Ok(())
}
