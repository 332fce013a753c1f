//! Hashed n-gram features: word n-grams and character n-grams folded into a
//! fixed power-of-two dimension with signed hashing, optionally L2-normalized.

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Exec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub word_orders: Vec<usize>,
    pub char_orders: Vec<usize>,
    pub hash_dim: usize,
    pub normalize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            word_orders: vec![1, 2],
            char_orders: vec![3, 4],
            hash_dim: 1 << 18,
            normalize: true,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hash_dim < 2 || !self.hash_dim.is_power_of_two() || self.hash_dim > 1 << 31 {
            return Err(Error::Config(format!(
                "hash_dim {} must be a power of two in [2, 2^31]",
                self.hash_dim
            )));
        }
        if self.word_orders.is_empty() && self.char_orders.is_empty() {
            return Err(Error::Config("at least one n-gram order is required".into()));
        }
        if self.word_orders.iter().chain(&self.char_orders).any(|&n| n == 0) {
            return Err(Error::Config("n-gram orders must be positive".into()));
        }
        Ok(())
    }
}

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds from unordered pairs, summing duplicates and dropping zeros.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_unstable_by_key(|p| p.0);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let mut out = Self { indices, values };
        out.drop_zeros();
        out
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        Self { indices, values }
    }

    fn drop_zeros(&mut self) {
        if self.values.contains(&0.0) {
            let (i, v) = self
                .indices
                .iter()
                .zip(&self.values)
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (*i, *v))
                .unzip();
            self.indices = i;
            self.values = v;
        }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = Self {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        };
        out.drop_zeros();
        out
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i as usize]).sum()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    /// Cosine similarity; `None` when either vector is zero.
    pub fn cosine(&self, other: &SparseVector) -> Option<f64> {
        let d = self.norm() * other.norm();
        (d > 0.0).then(|| self.dot(other) / d)
    }
}

fn hash_gram(tag: &[u8], parts: &[&str]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(tag);
    for (k, p) in parts.iter().enumerate() {
        if k > 0 {
            h.write_u8(0x1f);
        }
        h.write(p.as_bytes());
    }
    h.finish()
}

pub fn featurize(text: &str, cfg: &FeatureConfig) -> SparseVector {
    let mask = (cfg.hash_dim - 1) as u64;
    let mut pairs: Vec<(u32, f64)> = Vec::new();
    let mut push = |h: u64| {
        // top bit carries the sign, so colliding grams tend to cancel
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        pairs.push(((h & mask) as u32, sign));
    };

    let lower = text.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    for &n in &cfg.word_orders {
        let tag = [b'w', n as u8];
        for win in words.windows(n) {
            push(hash_gram(&tag, win));
        }
    }

    if !cfg.char_orders.is_empty() {
        let collapsed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
        let bounds: Vec<usize> = collapsed
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(collapsed.len()))
            .collect();
        let n_chars = bounds.len() - 1;
        for &n in &cfg.char_orders {
            let tag = [b'c', n as u8];
            if n_chars >= n {
                for s in 0..=n_chars - n {
                    push(hash_gram(&tag, &[&collapsed[bounds[s]..bounds[s + n]]]));
                }
            } else if n_chars > 0 {
                push(hash_gram(&tag, &[&collapsed]));
            }
        }
    }

    let v = SparseVector::from_pairs(pairs);
    if cfg.normalize {
        let norm = v.norm();
        if norm > 0.0 {
            return v.scaled(1.0 / norm);
        }
    }
    v
}

pub fn featurize_all<S: AsRef<str> + Sync>(
    texts: &[S],
    cfg: &FeatureConfig,
    exec: Exec,
) -> Vec<SparseVector> {
    par::map_indexed(exec, texts, |_, t| featurize(t.as_ref(), cfg))
}
