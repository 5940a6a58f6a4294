//! Ground-truth reference fronts and front-quality indicators (IGD, spread).
//!
//! Both indicators min-max normalise every point by the reference front's
//! cost and accuracy ranges before measuring Euclidean distances; a
//! zero-width range contributes nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    dominates, evaluate_unchecked, pareto_indices, CostMatrix, LabelMatrix, ObjectivePoint,
};

/// Default cap on `m^n` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    BruteForce,
    Incremental,
}

/// Mutually non-dominated true-objective points sorted by ascending cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFront {
    points: Vec<ObjectivePoint>,
    provenance: Provenance,
}

impl ReferenceFront {
    /// Filters `points` down to its non-dominated subset.
    pub fn new(points: &[ObjectivePoint], provenance: Provenance) -> Self {
        let points = pareto_indices(points)
            .into_iter()
            .map(|i| points[i])
            .collect();
        ReferenceFront { points, provenance }
    }

    pub fn points(&self) -> &[ObjectivePoint] {
        &self.points
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn min_cost(&self) -> Option<ObjectivePoint> {
        self.points.first().copied()
    }

    pub fn max_accuracy(&self) -> Option<ObjectivePoint> {
        self.points.last().copied()
    }
}

fn check_labels(c: &CostMatrix, a: &LabelMatrix) -> Result<()> {
    if !c.same_shape(a) {
        return Err(Error::Shape(format!(
            "cost matrix is {}x{} but label matrix is {}x{}",
            c.rows(),
            c.cols(),
            a.rows(),
            a.cols()
        )));
    }
    if c.rows() == 0 || c.cols() == 0 {
        return Err(Error::InvalidInstance(
            "need at least one query and one LLM".into(),
        ));
    }
    Ok(())
}

/// Cheapest LLM per query, ties towards a correct answer, then lower index.
fn cheapest_assignment(c: &CostMatrix, a: &LabelMatrix) -> Vec<usize> {
    (0..c.rows())
        .map(|i| {
            (1..c.cols()).fold(0, |b, k| {
                let (ck, cb) = (c.get(i, k), c.get(i, b));
                if ck < cb || (ck == cb && a.get(i, k) > a.get(i, b)) {
                    k
                } else {
                    b
                }
            })
        })
        .collect()
}

/// Exact front by enumerating all `m^n` assignments.
pub fn brute_force_front(c: &CostMatrix, a: &LabelMatrix, cap: u64) -> Result<ReferenceFront> {
    check_labels(c, a)?;
    let (n, m) = (c.rows(), c.cols());
    let size = (m as f64).powi(n as i32);
    if size > cap as f64 {
        return Err(Error::InstanceTooLarge { size, cap });
    }
    let mut asg = vec![0usize; n];
    let mut front: Vec<ObjectivePoint> = Vec::new();
    loop {
        let p = evaluate_unchecked(&asg, c, a);
        if !front.iter().any(|q| *q == p || dominates(q, &p)) {
            front.retain(|q| !dominates(&p, q));
            front.push(p);
        }
        // odometer increment
        let mut i = 0;
        while i < n {
            asg[i] += 1;
            if asg[i] < m {
                break;
            }
            asg[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    Ok(ReferenceFront::new(&front, Provenance::BruteForce))
}

/// Front traced from the all-cheapest assignment by repeatedly fixing the
/// unsolved query that is cheapest to make correct.
pub fn incremental_front(c: &CostMatrix, a: &LabelMatrix) -> Result<ReferenceFront> {
    check_labels(c, a)?;
    let (n, m) = (c.rows(), c.cols());
    let mut asg = cheapest_assignment(c, a);
    let mut recorded = vec![evaluate_unchecked(&asg, c, a)];
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, &cur) in asg.iter().enumerate().take(n) {
            if a.get(i, cur) == 1.0 {
                continue;
            }
            for k in 0..m {
                if a.get(i, k) != 1.0 {
                    continue;
                }
                let delta = c.get(i, k) - c.get(i, cur);
                if best.is_none_or(|(_, _, d)| delta < d) {
                    best = Some((i, k, delta));
                }
            }
        }
        let Some((i, k, _)) = best else { break };
        asg[i] = k;
        recorded.push(evaluate_unchecked(&asg, c, a));
    }
    Ok(ReferenceFront::new(&recorded, Provenance::Incremental))
}

struct Normalizer {
    cost: (f64, f64),
    acc: (f64, f64),
}

impl Normalizer {
    fn from_reference(r: &[ObjectivePoint]) -> Self {
        let span = |f: fn(&ObjectivePoint) -> f64| {
            let lo = r.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = r.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi - lo)
        };
        Normalizer {
            cost: span(|p| p.cost),
            acc: span(|p| p.accuracy),
        }
    }

    fn apply(&self, p: &ObjectivePoint) -> (f64, f64) {
        let norm = |v: f64, (lo, w): (f64, f64)| if w > 0.0 { (v - lo) / w } else { 0.0 };
        (norm(p.cost, self.cost), norm(p.accuracy, self.acc))
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn nearest(y: (f64, f64), set: &[(f64, f64)]) -> f64 {
    set.iter()
        .map(|&x| dist(x, y))
        .fold(f64::INFINITY, f64::min)
}

/// Inverted generational distance: `sqrt(sum_y min_x d(x, y)^2) / |R|` over reference points `y`.
pub fn igd(obtained: &[ObjectivePoint], reference: &ReferenceFront) -> Result<f64> {
    let r = reference.points();
    if obtained.is_empty() || r.is_empty() {
        return Err(Error::InvalidInput(
            "IGD needs non-empty obtained and reference sets".into(),
        ));
    }
    let norm = Normalizer::from_reference(r);
    let got: Vec<_> = obtained.iter().map(|p| norm.apply(p)).collect();
    let sum: f64 = r
        .iter()
        .map(|y| {
            let d = nearest(norm.apply(y), &got);
            d * d
        })
        .sum();
    Ok(sum.sqrt() / r.len() as f64)
}

/// Spread indicator. Consecutive gaps are taken along ascending cost; the
/// extreme terms are the distances from the reference front's cheapest and
/// most expensive points to their nearest obtained point. Returns 0 when the
/// denominator vanishes.
pub fn delta_spread(obtained: &[ObjectivePoint], reference: &ReferenceFront) -> Result<f64> {
    let r = reference.points();
    if obtained.len() < 2 {
        return Err(Error::InvalidInput(
            "spread needs at least two obtained points".into(),
        ));
    }
    if r.is_empty() {
        return Err(Error::InvalidInput(
            "spread needs a non-empty reference front".into(),
        ));
    }
    let norm = Normalizer::from_reference(r);
    let mut got: Vec<_> = obtained.iter().map(|p| norm.apply(p)).collect();
    got.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let gaps: Vec<f64> = got.windows(2).map(|w| dist(w[0], w[1])).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let d_first = nearest(norm.apply(&r[0]), &got);
    let d_last = nearest(norm.apply(&r[r.len() - 1]), &got);
    let spread: f64 = gaps.iter().map(|g| (g - mean).abs()).sum();
    let denom = d_first + d_last + gaps.len() as f64 * mean;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((d_first + d_last + spread) / denom)
}
