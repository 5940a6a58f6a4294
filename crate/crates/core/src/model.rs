//! Domain types shared by every stage: queries, priced LLM candidates, the
//! per-query cost and accuracy tables, evaluated assignments and the
//! non-dominated archive that collects them.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A query to be routed. `token_count` drives its invocation cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: usize,
    pub token_count: u64,
    pub text: Option<String>,
    pub features: Option<Vec<f64>>,
}

impl Query {
    pub fn new(id: usize, token_count: u64) -> Self {
        Query {
            id,
            token_count,
            text: None,
            features: None,
        }
    }
}

/// A candidate model with a flat per-token price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmCandidate {
    pub id: usize,
    pub name: String,
    pub price_per_token: f64,
}

/// Dense row-major `rows x cols` table of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::Shape(format!(
                "row {i} has {} columns, expected {cols}",
                r.len()
            )));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.cols + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.data[i * self.cols + k] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Keeps only the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

macro_rules! matrix_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Matrix);

        impl Deref for $name {
            type Target = Matrix;
            fn deref(&self) -> &Matrix {
                &self.0
            }
        }

        impl $name {
            pub fn into_inner(self) -> Matrix {
                self.0
            }

            pub fn select_rows(&self, rows: &[usize]) -> Self {
                $name(self.0.select_rows(rows))
            }
        }
    };
}

matrix_newtype!(
    /// Per-query, per-LLM invocation cost. All entries are finite and non-negative.
    CostMatrix
);
matrix_newtype!(
    /// Ground-truth correctness: entry `(i, k)` is 1 when LLM `k` answers query `i` correctly.
    LabelMatrix
);
matrix_newtype!(
    /// Robust predicted success probabilities, every entry in `[0, 1]`.
    PredictionMatrix
);

impl CostMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if let Some(pos) = m.data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInstance(format!(
                "cost ({}, {}) = {} is not a finite non-negative number",
                pos / m.cols.max(1),
                pos % m.cols.max(1),
                m.data[pos]
            )));
        }
        Ok(CostMatrix(m))
    }
}

impl LabelMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if let Some(pos) = m.data.iter().position(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::InvalidInstance(format!(
                "label ({}, {}) = {} is not 0 or 1",
                pos / m.cols.max(1),
                pos % m.cols.max(1),
                m.data[pos]
            )));
        }
        Ok(LabelMatrix(m))
    }
}

impl PredictionMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if let Some(pos) = m
            .data
            .iter()
            .position(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
        {
            return Err(Error::InvalidInstance(format!(
                "prediction ({}, {}) = {} is outside [0, 1]",
                pos / m.cols.max(1),
                pos % m.cols.max(1),
                m.data[pos]
            )));
        }
        Ok(PredictionMatrix(m))
    }
}

/// `cost[i][k] = token_count_i * price_k`.
pub fn compute_cost_matrix(queries: &[Query], llms: &[LlmCandidate]) -> Result<CostMatrix> {
    if queries.is_empty() || llms.is_empty() {
        return Err(Error::InvalidInstance(
            "at least one query and one LLM are required".into(),
        ));
    }
    if let Some(llm) = llms
        .iter()
        .find(|l| !l.price_per_token.is_finite() || l.price_per_token < 0.0)
    {
        return Err(Error::InvalidInstance(format!(
            "LLM {} has invalid price {}",
            llm.id, llm.price_per_token
        )));
    }
    let mut m = Matrix::zeros(queries.len(), llms.len());
    for (i, q) in queries.iter().enumerate() {
        for (k, llm) in llms.iter().enumerate() {
            m.set(i, k, q.token_count as f64 * llm.price_per_token);
        }
    }
    CostMatrix::new(m)
}

/// A point in objective space: total cost (minimised) and mean accuracy (maximised).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub cost: f64,
    pub accuracy: f64,
}

impl ObjectivePoint {
    pub fn new(cost: f64, accuracy: f64) -> Self {
        ObjectivePoint { cost, accuracy }
    }
}

/// Mixed min-cost / max-accuracy Pareto dominance: `a` is no worse in both
/// objectives and strictly better in at least one.
pub fn dominates(a: &ObjectivePoint, b: &ObjectivePoint) -> bool {
    (a.cost <= b.cost && a.accuracy > b.accuracy) || (a.cost < b.cost && a.accuracy >= b.accuracy)
}

fn check_shapes(n: usize, costs: &Matrix, acc: &Matrix) -> Result<()> {
    if !costs.same_shape(acc) {
        return Err(Error::Shape(format!(
            "cost matrix is {}x{} but accuracy matrix is {}x{}",
            costs.rows(),
            costs.cols(),
            acc.rows(),
            acc.cols()
        )));
    }
    if costs.rows() != n {
        return Err(Error::Shape(format!(
            "assignment has {n} entries but matrices have {} rows",
            costs.rows()
        )));
    }
    Ok(())
}

/// Evaluates an assignment against a cost table and any accuracy table
/// (ground-truth labels or predictions). Sums run in ascending query order.
pub fn evaluate_assignment(
    assignment: &[usize],
    costs: &CostMatrix,
    acc: &Matrix,
) -> Result<ObjectivePoint> {
    check_shapes(assignment.len(), costs, acc)?;
    let m = costs.cols();
    if let Some((i, k)) = assignment.iter().enumerate().find(|(_, &k)| k >= m) {
        return Err(Error::Shape(format!(
            "query {i} assigned to LLM {k}, but only {m} LLMs exist"
        )));
    }
    Ok(evaluate_unchecked(assignment, costs, acc))
}

/// Same as [`evaluate_assignment`] without shape checks.
pub(crate) fn evaluate_unchecked(
    assignment: &[usize],
    costs: &Matrix,
    acc: &Matrix,
) -> ObjectivePoint {
    let mut cost = 0.0;
    let mut hits = 0.0;
    for (i, &k) in assignment.iter().enumerate() {
        cost += costs.get(i, k);
        hits += acc.get(i, k);
    }
    let n = assignment.len();
    let accuracy = if n == 0 { 0.0 } else { hits / n as f64 };
    ObjectivePoint { cost, accuracy }
}

/// An assignment of every query to exactly one LLM, with its cached objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    assignment: Vec<usize>,
    objectives: ObjectivePoint,
}

impl Solution {
    pub fn new(assignment: Vec<usize>, costs: &CostMatrix, acc: &Matrix) -> Result<Self> {
        let objectives = evaluate_assignment(&assignment, costs, acc)?;
        Ok(Solution {
            assignment,
            objectives,
        })
    }

    pub(crate) fn from_parts(assignment: Vec<usize>, objectives: ObjectivePoint) -> Self {
        Solution {
            assignment,
            objectives,
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn objectives(&self) -> ObjectivePoint {
        self.objectives
    }

    pub fn cost(&self) -> f64 {
        self.objectives.cost
    }

    pub fn accuracy(&self) -> f64 {
        self.objectives.accuracy
    }

    /// Re-evaluates this assignment against another accuracy table (e.g. true labels).
    pub fn evaluate_with(&self, costs: &CostMatrix, acc: &Matrix) -> Result<ObjectivePoint> {
        evaluate_assignment(&self.assignment, costs, acc)
    }
}

/// Evaluates a solution's objective point. Thin wrapper kept for symmetry
/// with the objective definitions.
pub fn evaluate(solution: &Solution, costs: &CostMatrix, acc: &Matrix) -> Result<ObjectivePoint> {
    solution.evaluate_with(costs, acc)
}

/// Mutually non-dominated, objective-deduplicated solutions sorted by cost.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolutionArchive {
    members: Vec<Solution>,
}

impl SolutionArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn members(&self) -> &[Solution] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn points(&self) -> Vec<ObjectivePoint> {
        self.members.iter().map(Solution::objectives).collect()
    }

    pub fn into_members(self) -> Vec<Solution> {
        self.members
    }

    /// Whether a solution at `p` would enter the archive.
    pub fn accepts(&self, p: &ObjectivePoint) -> bool {
        !self
            .members
            .iter()
            .any(|s| s.objectives == *p || dominates(&s.objectives, p))
    }

    /// Inserts `solution` unless an archived member dominates it or shares its
    /// objective pair; evicts members it dominates. Returns whether it entered.
    pub fn insert(&mut self, solution: Solution) -> bool {
        let p = solution.objectives;
        if !self.accepts(&p) {
            return false;
        }
        self.members.retain(|s| !dominates(&p, &s.objectives));
        let pos = self.members.partition_point(|s| s.objectives.cost < p.cost);
        self.members.insert(pos, solution);
        true
    }

    pub fn extend<I: IntoIterator<Item = Solution>>(&mut self, solutions: I) {
        for s in solutions {
            self.insert(s);
        }
    }

    /// The cheapest member.
    pub fn min_cost(&self) -> Option<&Solution> {
        self.members.first()
    }

    /// The most accurate member.
    pub fn max_accuracy(&self) -> Option<&Solution> {
        self.members.last()
    }
}

/// Keeps the solutions no other input dominates, dropping later duplicates of
/// an objective pair, sorted by ascending cost.
pub fn pareto_filter<I: IntoIterator<Item = Solution>>(solutions: I) -> SolutionArchive {
    let mut archive = SolutionArchive::new();
    archive.extend(solutions);
    archive
}

/// Indices of non-dominated points (first occurrence of duplicates), sorted by cost.
pub fn pareto_indices(points: &[ObjectivePoint]) -> Vec<usize> {
    let mut keep: Vec<usize> = Vec::new();
    for (idx, p) in points.iter().enumerate() {
        if keep
            .iter()
            .any(|&j| points[j] == *p || dominates(&points[j], p))
        {
            continue;
        }
        keep.retain(|&j| !dominates(p, &points[j]));
        keep.push(idx);
    }
    keep.sort_by(|&a, &b| points[a].cost.total_cmp(&points[b].cost));
    keep
}
