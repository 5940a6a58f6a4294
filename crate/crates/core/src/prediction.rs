//! Bootstrap ensemble of per-LLM random forests and robust-aware success
//! probabilities.
//!
//! Each bootstrap sample `j` trains one [`BaseClassifier`] and is weighted by
//! its validation cell accuracy `w_j`. For a query and LLM the ensemble
//! reports `clamp(mean_w + alpha * sd, 0, 1)` where `mean_w` is the
//! `w`-weighted mean of the per-sample probabilities and `sd` their
//! population standard deviation.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SplitRecord;
use crate::error::{Error, Result};
use crate::featurize::{featurize, FeatureVector};
use crate::forest::{Forest, ForestConfig};
use crate::model::{Matrix, PredictionMatrix, Query};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Rows of features with their `n x m` binary correctness labels.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Matrix,
}

impl LabeledSet {
    pub fn new(features: Vec<Vec<f64>>, labels: Matrix) -> Result<Self> {
        if features.len() != labels.rows() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} label rows",
                features.len(),
                labels.rows()
            )));
        }
        if let Some(d) = features.first().map(Vec::len) {
            if let Some(i) = features.iter().position(|r| r.len() != d) {
                return Err(Error::Shape(format!(
                    "feature row {i} has dimension {} instead of {d}",
                    features[i].len()
                )));
            }
        }
        if labels.as_slice().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidInput("labels must be 0 or 1".into()));
        }
        Ok(LabeledSet { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }
}

/// How a query's feature vector is obtained when it carries none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeaturizerConfig {
    /// Signed hashing of the query text.
    Hashing { dim: usize },
    /// Features supplied externally; text cannot be featurized.
    Precomputed { dim: usize },
}

impl FeaturizerConfig {
    pub fn dim(&self) -> usize {
        match *self {
            FeaturizerConfig::Hashing { dim } | FeaturizerConfig::Precomputed { dim } => dim,
        }
    }

    /// Feature vector for `q`: its stored features, else hashed text.
    pub fn features_for(&self, q: &Query) -> Result<Vec<f64>> {
        if let Some(f) = &q.features {
            if f.len() != self.dim() {
                return Err(Error::Shape(format!(
                    "query {} has {} features, model expects {}",
                    q.id,
                    f.len(),
                    self.dim()
                )));
            }
            return Ok(f.clone());
        }
        match (self, &q.text) {
            (FeaturizerConfig::Hashing { dim }, Some(text)) => Ok(featurize(text, *dim).0),
            _ => Err(Error::IncompleteInput { query_id: q.id }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Number of bootstrap samples.
    pub samples: usize,
    pub alpha: f64,
    pub forest: ForestConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            samples: 100,
            alpha: 0.5,
            forest: ForestConfig::default(),
        }
    }
}

/// One classifier per LLM, fitted on a single bootstrap sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseClassifier {
    heads: Vec<Forest>,
}

impl BaseClassifier {
    fn fit<R: Rng + ?Sized>(
        train: &LabeledSet,
        sample: &[usize],
        config: &ForestConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let heads = (0..train.labels.cols())
            .map(|k| {
                let y: Vec<bool> = (0..train.len())
                    .map(|i| train.labels.get(i, k) == 1.0)
                    .collect();
                Forest::fit(&train.features, &y, sample, config, rng)
            })
            .collect::<Result<_>>()?;
        Ok(BaseClassifier { heads })
    }

    /// Per-LLM success probability.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.heads.iter().map(|f| f.predict(x)).collect()
    }

    /// Fraction of `(row, llm)` cells whose thresholded prediction matches.
    fn cell_accuracy(&self, set: &LabeledSet) -> f64 {
        let m = self.heads.len();
        let mut correct = 0usize;
        for (i, x) in set.features.iter().enumerate() {
            for (k, p) in self.predict(x).into_iter().enumerate() {
                if (p >= 0.5) == (set.labels.get(i, k) == 1.0) {
                    correct += 1;
                }
            }
        }
        correct as f64 / (set.len() * m) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub featurizer: FeaturizerConfig,
    pub alpha: f64,
    pub forest: ForestConfig,
    weights: Vec<f64>,
    samples: Vec<BaseClassifier>,
}

/// `sum(w_j p_j) / sum(w_j)`.
pub fn aggregate(preds: &[f64], weights: &[f64]) -> Result<f64> {
    if preds.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} predictions but {} weights",
            preds.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateEnsemble(format!("weight sum is {total}")));
    }
    let num: f64 = preds.iter().zip(weights).map(|(p, w)| p * w).sum();
    Ok(num / total)
}

/// Population standard deviation.
fn population_sd(values: &[f64]) -> f64 {
    // a constant sample has exactly zero spread, whatever the rounding of its mean
    if values.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// `clamp(mean + alpha * sd, 0, 1)` over one LLM's per-sample probabilities.
pub fn robust_probability(preds: &[f64], weights: &[f64], alpha: f64) -> Result<f64> {
    let mean = aggregate(preds, weights)?;
    Ok((mean + alpha * population_sd(preds)).clamp(0.0, 1.0))
}

/// Trains `config.samples` bootstrap classifiers. Sample `j` draws from the
/// ChaCha8 stream `j` of `seed`, so results do not depend on thread scheduling.
pub fn train_ensemble(
    train: &LabeledSet,
    val: &LabeledSet,
    featurizer: FeaturizerConfig,
    config: &EnsembleConfig,
    seed: u64,
) -> Result<EnsembleModel> {
    if config.samples == 0 {
        return Err(Error::InvalidParameter(
            "bootstrap sample count must be positive".into(),
        ));
    }
    if !config.alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be finite, got {}",
            config.alpha
        )));
    }
    config.forest.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidInput(
            "training and validation sets must be non-empty".into(),
        ));
    }
    if train.labels.cols() != val.labels.cols() {
        return Err(Error::Shape(
            "training and validation label widths differ".into(),
        ));
    }
    for set in [train, val] {
        if set.dim() != featurizer.dim() {
            return Err(Error::Shape(format!(
                "feature dimension {} does not match featurizer dimension {}",
                set.dim(),
                featurizer.dim()
            )));
        }
    }

    let fitted: Vec<(BaseClassifier, f64)> = (0..config.samples)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let sample: Vec<usize> = (0..train.len())
                .map(|_| rng.random_range(0..train.len()))
                .collect();
            let clf = BaseClassifier::fit(train, &sample, &config.forest, &mut rng)?;
            let w = clf.cell_accuracy(val);
            Ok((clf, w))
        })
        .collect::<Result<_>>()?;
    let (samples, weights): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::DegenerateEnsemble(
            "every bootstrap classifier scored zero on validation".into(),
        ));
    }
    Ok(EnsembleModel {
        featurizer,
        alpha: config.alpha,
        forest: config.forest.clone(),
        weights,
        samples,
    })
}

impl EnsembleModel {
    pub fn feature_dim(&self) -> usize {
        self.featurizer.dim()
    }

    pub fn llm_count(&self) -> usize {
        self.samples.first().map_or(0, |s| s.heads.len())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Same trees and weights, different robustness parameter.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Per-sample probabilities, `[sample][llm]`.
    pub fn sample_predictions(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.feature_dim() {
            return Err(Error::Shape(format!(
                "feature vector has dimension {}, model expects {}",
                x.len(),
                self.feature_dim()
            )));
        }
        Ok(self.samples.iter().map(|s| s.predict(x)).collect())
    }

    /// Robust success probability of every LLM for one feature vector.
    pub fn predict_robust(&self, features: &FeatureVector) -> Result<Vec<f64>> {
        self.predict_robust_slice(features.values())
    }

    pub(crate) fn predict_robust_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        let per_sample = self.sample_predictions(x)?;
        let mut column = vec![0.0; per_sample.len()];
        (0..self.llm_count())
            .map(|k| {
                for (c, row) in column.iter_mut().zip(&per_sample) {
                    *c = row[k];
                }
                robust_probability(&column, &self.weights, self.alpha)
            })
            .collect()
    }

    /// One row per query; queries without features are featurized from text.
    pub fn build_prediction_matrix(&self, queries: &[Query]) -> Result<PredictionMatrix> {
        let m = self.llm_count();
        let rows: Vec<Vec<f64>> = queries
            .par_iter()
            .map(|q| {
                let x = self.featurizer.features_for(q)?;
                self.predict_robust_slice(&x)
            })
            .collect::<Result<_>>()?;
        let data = rows.concat();
        PredictionMatrix::new(Matrix::from_vec(queries.len(), m, data)?)
    }

    pub fn save(&self, path: &Path, split: Option<&SplitRecord>) -> Result<()> {
        let doc = ModelDocumentRef {
            format: MODEL_FORMAT,
            format_version: MODEL_FORMAT_VERSION,
            model: self,
            split,
        };
        let text = serde_json::to_string(&doc).expect("model serialization cannot fail");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(EnsembleModel, Option<SplitRecord>)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ModelDocument = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })?;
        if doc.format != MODEL_FORMAT || doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format {
                path: path.into(),
                message: format!(
                    "unsupported model format {} v{}",
                    doc.format, doc.format_version
                ),
            });
        }
        if doc.model.weights.len() != doc.model.samples.len() || doc.model.samples.is_empty() {
            return Err(Error::Format {
                path: path.into(),
                message: "weights and samples disagree".into(),
            });
        }
        Ok((doc.model, doc.split))
    }
}

const MODEL_FORMAT: &str = "llm-assign/ensemble";

#[derive(Serialize)]
struct ModelDocumentRef<'a> {
    format: &'static str,
    format_version: u32,
    model: &'a EnsembleModel,
    split: Option<&'a SplitRecord>,
}

#[derive(Deserialize)]
struct ModelDocument {
    format: String,
    format_version: u32,
    model: EnsembleModel,
    split: Option<SplitRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn toy_sets(n: usize, seed: u64) -> (LabeledSet, LabeledSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut make = |n: usize| {
            let mut feats = Vec::new();
            let mut labels = Matrix::zeros(n, 2);
            for i in 0..n {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                labels.set(i, 0, (a > 0.0) as u8 as f64);
                labels.set(i, 1, (b > 0.2) as u8 as f64);
                feats.push(vec![a, b]);
            }
            LabeledSet::new(feats, labels).unwrap()
        };
        (make(n), make(n))
    }

    fn small_config(samples: usize, alpha: f64) -> EnsembleConfig {
        EnsembleConfig {
            samples,
            alpha,
            forest: ForestConfig {
                trees: 5,
                ..ForestConfig::default()
            },
        }
    }

    const PRE2: FeaturizerConfig = FeaturizerConfig::Precomputed { dim: 2 };

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[0.2, 0.8], &[1.0, 1.0]).unwrap(), 0.5);
        assert_eq!(aggregate(&[0.2, 0.8], &[1.0, 0.0]).unwrap(), 0.2);
        assert_eq!(aggregate(&[0.0, 1.0], &[1.0, 3.0]).unwrap(), 0.75);
        assert!(matches!(
            aggregate(&[0.3], &[0.0]),
            Err(Error::DegenerateEnsemble(_))
        ));
        assert!(matches!(
            aggregate(&[0.3], &[1.0, 1.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn robust_examples() {
        for alpha in [-1.0, 0.0, 0.5, 3.0] {
            assert_eq!(
                robust_probability(&[0.6, 0.6, 0.6], &[0.2, 0.5, 0.9], alpha).unwrap(),
                0.6
            );
            let flat = [0.1; 3];
            let w = [0.3, 0.7, 0.1];
            assert_eq!(
                robust_probability(&flat, &w, alpha).unwrap(),
                aggregate(&flat, &w).unwrap()
            );
        }
        let p = [0.1, 0.4, 0.7];
        let w = [0.5, 0.9, 0.3];
        assert_eq!(
            robust_probability(&p, &w, 0.0).unwrap(),
            aggregate(&p, &w).unwrap()
        );
        assert_eq!(
            robust_probability(&[0.0, 1.0], &[1.0, 1.0], 1.0).unwrap(),
            1.0
        );
        assert_eq!(
            robust_probability(&[0.0, 1.0], &[1.0, 1.0], -1.0).unwrap(),
            0.0
        );
    }

    proptest! {
        #[test]
        fn aggregate_scale_invariant(
            pw in prop::collection::vec((0.0f64..=1.0, 0.01f64..=1.0), 1..20),
            scale in 0.1f64..100.0,
        ) {
            let (p, w): (Vec<f64>, Vec<f64>) = pw.into_iter().unzip();
            let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
            let a = aggregate(&p, &w).unwrap();
            let b = aggregate(&p, &scaled).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn robust_monotone_in_alpha(
            pw in prop::collection::vec((0.0f64..=1.0, 0.01f64..=1.0), 1..20),
            a1 in -2.0f64..2.0, a2 in -2.0f64..2.0,
        ) {
            let (p, w): (Vec<f64>, Vec<f64>) = pw.into_iter().unzip();
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            prop_assert!(robust_probability(&p, &w, lo).unwrap() <= robust_probability(&p, &w, hi).unwrap());
        }
    }

    #[test]
    fn train_rejects_zero_samples() {
        let (tr, va) = toy_sets(10, 1);
        let r = train_ensemble(&tr, &va, PRE2, &small_config(0, 0.5), 1);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn degenerate_weights_are_reported() {
        // validation labels are the exact inverse of an unambiguous training signal
        let tr = LabeledSet::new(
            vec![vec![0.0, 0.0]; 4],
            Matrix::from_vec(4, 1, vec![1.0; 4]).unwrap(),
        )
        .unwrap();
        let va = LabeledSet::new(vec![vec![0.0, 0.0]; 2], Matrix::zeros(2, 1)).unwrap();
        let r = train_ensemble(&tr, &va, PRE2, &small_config(3, 0.5), 7);
        assert!(matches!(r, Err(Error::DegenerateEnsemble(_))));
    }

    #[test]
    fn single_example_single_sample() {
        let set = LabeledSet::new(
            vec![vec![0.3, 0.1]],
            Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let model = train_ensemble(&set, &set, PRE2, &small_config(1, 0.5), 3).unwrap();
        assert_eq!(model.sample_count(), 1);
        assert_eq!(model.weights(), &[1.0]);
        // u = 1 means zero spread, so alpha has no effect
        let base = model.sample_predictions(&[0.3, 0.1]).unwrap()[0].clone();
        for alpha in [-1.0, 0.0, 1.0] {
            let m = model.clone().with_alpha(alpha);
            assert_eq!(
                m.predict_robust(&FeatureVector(vec![0.3, 0.1])).unwrap(),
                base
            );
        }
    }

    #[test]
    fn training_is_reproducible() {
        let (tr, va) = toy_sets(30, 2);
        let a = train_ensemble(&tr, &va, PRE2, &small_config(8, 0.5), 42).unwrap();
        let b = train_ensemble(&tr, &va, PRE2, &small_config(8, 0.5), 42).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a, b);
        let c = train_ensemble(&tr, &va, PRE2, &small_config(8, 0.5), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn predictions_are_probabilities() {
        let (tr, va) = toy_sets(40, 5);
        let model = train_ensemble(&tr, &va, PRE2, &small_config(10, 1.0), 9).unwrap();
        assert!(model.weights().iter().all(|w| (0.0..=1.0).contains(w)));
        for x in &va.features {
            let p = model.predict_robust(&FeatureVector(x.clone())).unwrap();
            assert_eq!(p.len(), 2);
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!(matches!(
            model.predict_robust(&FeatureVector(vec![0.0; 3])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn prediction_matrix_from_queries() {
        let (tr, va) = toy_sets(20, 6);
        let model = train_ensemble(&tr, &va, PRE2, &small_config(4, 0.5), 1).unwrap();
        let empty = model.build_prediction_matrix(&[]).unwrap();
        assert_eq!((empty.rows(), empty.cols()), (0, 2));

        let mut q = Query::new(0, 10);
        q.features = Some(vec![0.4, -0.2]);
        let mut q2 = q.clone();
        q2.id = 1;
        let p = model.build_prediction_matrix(&[q.clone(), q2]).unwrap();
        assert_eq!(p.row(0), p.row(1));

        let bare = Query::new(7, 10);
        assert!(matches!(
            model.build_prediction_matrix(&[q, bare]),
            Err(Error::IncompleteInput { query_id: 7 })
        ));
    }

    #[test]
    fn hashing_featurizer_handles_text_queries() {
        let dim = 16;
        let texts = [
            "good cheap question",
            "hard expensive puzzle",
            "easy one",
            "very hard riddle",
        ];
        let feats: Vec<Vec<f64>> = texts.iter().map(|t| featurize(t, dim).0).collect();
        let labels = Matrix::from_rows(&[
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let set = LabeledSet::new(feats, labels).unwrap();
        let model = train_ensemble(
            &set,
            &set,
            FeaturizerConfig::Hashing { dim },
            &small_config(3, 0.0),
            5,
        )
        .unwrap();
        let mut q = Query::new(0, 5);
        q.text = Some("another hard riddle".into());
        let p = model.build_prediction_matrix(&[q]).unwrap();
        assert_eq!(p.cols(), 2);
    }

    #[test]
    fn persistence_round_trip_is_bit_exact() {
        let (tr, va) = toy_sets(25, 8);
        let model = train_ensemble(&tr, &va, PRE2, &small_config(6, 0.5), 77).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path, None).unwrap();
        let (back, split) = EnsembleModel::load(&path).unwrap();
        assert!(split.is_none());
        assert_eq!(back, model);
        for x in &va.features {
            let a = model.predict_robust(&FeatureVector(x.clone())).unwrap();
            let b = back.predict_robust(&FeatureVector(x.clone())).unwrap();
            assert_eq!(
                a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
