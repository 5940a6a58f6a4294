//! Signed feature hashing of query text.
//!
//! Tokens are lowercased word unigrams plus character trigrams of the
//! lowercased text. Each token hashes (64-bit FNV-1a, namespaced by token
//! kind) to one of `d` buckets; the top hash bit picks the sign. The result is
//! L2-normalised.

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

/// Default hashing dimension.
pub const DEFAULT_DIM: usize = 256;

/// A fixed-length real feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn token_hash(namespace: u8, token: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&[namespace, 0]);
    h.write(token.as_bytes());
    h.finish()
}

/// Hashes `text` into a unit-norm vector of dimension `d` (zero vector for
/// text without tokens). `d` must be at least 1.
pub fn featurize(text: &str, d: usize) -> FeatureVector {
    assert!(d >= 1, "feature dimension must be positive");
    let lower = text.to_lowercase();
    let mut v = vec![0.0; d];
    let mut add = |h: u64| {
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[(h % d as u64) as usize] += sign;
    };

    for word in lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        add(token_hash(b'w', word));
    }
    let chars: Vec<char> = lower.chars().collect();
    let mut buf = String::with_capacity(12);
    for tri in chars.windows(3) {
        buf.clear();
        buf.extend(tri);
        add(token_hash(b'c', &buf));
    }

    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    FeatureVector(v)
}
