//! Binary CART trees (Gini splits) and random forests built from them.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per tree; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    /// Fit each tree on a bootstrap resample of its input.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 20,
            max_depth: 8,
            min_leaf: 2,
            max_features: None,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidParameter(
                "forest needs at least one tree".into(),
            ));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidParameter("min_leaf must be positive".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::InvalidParameter(
                "max_features must be positive".into(),
            ));
        }
        Ok(())
    }

    fn features_per_tree(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        prob: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted tree; node 0 is the root. Leaves hold the positive-class fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { prob } => return prob,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    features: Vec<usize>,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let prob = if idx.is_empty() {
            0.0
        } else {
            pos as f64 / idx.len() as f64
        };
        self.nodes.push(Node::Leaf { prob });
        self.nodes.len() - 1
    }

    /// Best (feature, threshold) by weighted Gini; `None` when no split lowers impurity.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.y[i]).count();
        let parent = gini_sum(total_pos, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(n);
        for &f in &self.features {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for j in 0..n - 1 {
                if pairs[j].1 {
                    left_pos += 1;
                }
                let nl = j + 1;
                if nl < self.min_leaf || n - nl < self.min_leaf {
                    continue;
                }
                let (lo, hi) = (pairs[j].0, pairs[j + 1].0);
                if lo >= hi {
                    continue;
                }
                let score = gini_sum(left_pos, nl) + gini_sum(total_pos - left_pos, n - nl);
                if score < parent - 1e-12 && best.is_none_or(|(s, _, _)| score < s) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((score, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf || pos == 0 || pos == idx.len()
        {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { prob: 0.0 });
        let x = self.x;
        idx.sort_by_key(|&i| x[i][feature] > threshold);
        let split_at = idx.partition_point(|&i| x[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(split_at);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

/// `n * gini(node)`; summing children gives the weighted impurity up to a constant.
fn gini_sum(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    n as f64 * 2.0 * p * (1.0 - p)
}

/// Random forest for one binary target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    /// Fits on rows `sample` of `x`/`y` (repeats allowed).
    pub fn fit<R: Rng + ?Sized>(
        x: &[Vec<f64>],
        y: &[bool],
        sample: &[usize],
        config: &ForestConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if sample.is_empty() {
            return Err(Error::InvalidInput(
                "cannot fit a forest on zero rows".into(),
            ));
        }
        let d = x[sample[0]].len();
        let k = config.features_per_tree(d);
        let mut trees = Vec::with_capacity(config.trees);
        for _ in 0..config.trees {
            let mut idx: Vec<usize> = if config.bootstrap {
                (0..sample.len())
                    .map(|_| sample[rng.random_range(0..sample.len())])
                    .collect()
            } else {
                sample.to_vec()
            };
            let mut features = if d == 0 {
                Vec::new()
            } else {
                index::sample(rng, d, k).into_vec()
            };
            features.sort_unstable();
            let mut b = Builder {
                x,
                y,
                features,
                max_depth: config.max_depth,
                min_leaf: config.min_leaf,
                nodes: Vec::new(),
            };
            b.grow(&mut idx, 0);
            trees.push(Tree { nodes: b.nodes });
        }
        Ok(Forest { trees })
    }

    /// Mean of the trees' leaf probabilities.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}
