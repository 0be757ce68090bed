//! Topic-coverage model for dependent outcomes.
//!
//! Each item carries a coverage vector `c(x)` in `[0,1]^d'`. A set covers
//! topic `i` with `1 - prod(1 - c_i(x))`, a monotone submodular function, and
//! the feature of an item given an already-played prefix is its centered,
//! rescaled marginal coverage gain.

mod gmm;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

pub use gmm::{build_coverage_from_embeddings, build_coverage_with_ids, GaussianMixture, GmmOptions};

/// Per-item coverage vectors, keyed by stable item id.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageModel {
    d_prime: usize,
    c: Vec<f64>,
    ids: Vec<u64>,
    rows: BTreeMap<u64, usize>,
}

impl CoverageModel {
    /// Rows get ids `0..rows.len()`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len() as u64).collect();
        Self::with_ids(rows, ids)
    }

    pub fn with_ids(rows: Vec<Vec<f64>>, ids: Vec<u64>) -> Result<Self> {
        let d_prime = rows.first().map_or(1, Vec::len);
        let mut c = Vec::with_capacity(rows.len() * d_prime);
        for row in &rows {
            if row.len() != d_prime {
                return Err(Error::DimensionMismatch {
                    expected: d_prime,
                    found: row.len(),
                });
            }
            c.extend_from_slice(row);
        }
        Self::from_flat(d_prime, c, ids)
    }

    pub fn from_flat(d_prime: usize, c: Vec<f64>, ids: Vec<u64>) -> Result<Self> {
        if d_prime == 0 {
            return Err(Error::InvalidParameter("topic dimension must be at least 1"));
        }
        if c.len() != d_prime * ids.len() {
            return Err(Error::DimensionMismatch {
                expected: d_prime * ids.len(),
                found: c.len(),
            });
        }
        if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("coverage components must lie in [0, 1]"));
        }
        let mut rows = BTreeMap::new();
        for (row, &id) in ids.iter().enumerate() {
            if rows.insert(id, row).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        Ok(Self { d_prime, c, ids, rows })
    }

    pub fn d_prime(&self) -> usize {
        self.d_prime
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Coverage vector of row `index`.
    pub fn coverage(&self, index: usize) -> &[f64] {
        &self.c[index * self.d_prime..(index + 1) * self.d_prime]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    /// Row holding item `id`.
    pub fn row_of(&self, id: u64) -> Option<usize> {
        self.rows.get(&id).copied()
    }

    /// Rows for a list of item ids, failing on the first unknown id.
    pub fn rows_for(&self, ids: &[u64]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|&id| {
                self.row_of(id)
                    .ok_or(Error::InvalidParameter("item id has no coverage vector"))
            })
            .collect()
    }

    fn check_row(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange { index, len: self.len() });
        }
        Ok(())
    }

    /// `1 - prod_{x in subset} (1 - c_i(x))` per topic.
    pub fn set_coverage(&self, subset: &[usize]) -> Result<Vec<f64>> {
        let mut remaining = vec![1.0; self.d_prime];
        for &x in subset {
            self.check_row(x)?;
            for (r, c) in remaining.iter_mut().zip(self.coverage(x)) {
                *r *= 1.0 - c;
            }
        }
        Ok(remaining.into_iter().map(|r| 1.0 - r).collect())
    }

    /// Marginal coverage gained by adding `candidate` to `prefix`.
    pub fn coverage_difference(&self, prefix: &[usize], candidate: usize) -> Result<Vec<f64>> {
        self.check_row(candidate)?;
        if prefix.contains(&candidate) {
            return Err(Error::DuplicateIndex(candidate));
        }
        let before = self.set_coverage(prefix)?;
        let mut with = prefix.to_vec();
        with.push(candidate);
        let after = self.set_coverage(&with)?;
        Ok(after.iter().zip(&before).map(|(a, b)| (a - b).max(0.0)).collect())
    }
}

/// Centers a coverage difference and rescales it into the unit ball:
/// `(2 diff_i - 1) / sqrt(d')`.
pub fn bar_c(diff: &[f64]) -> Vec<f64> {
    let scale = 1.0 / math::sqrt(diff.len() as f64);
    diff.iter().map(|&v| (2.0 * v - 1.0) * scale).collect()
}

/// Uncovered mass `prod (1 - c_i)` of a growing prefix; gives coverage
/// differences in `O(d')` per candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixCoverage {
    remaining: Vec<f64>,
}

impl PrefixCoverage {
    pub fn new(d_prime: usize) -> Self {
        Self {
            remaining: vec![1.0; d_prime],
        }
    }

    /// Coverage difference of an item with coverage `c` given the prefix.
    pub fn difference(&self, c: &[f64]) -> Vec<f64> {
        self.remaining.iter().zip(c).map(|(r, ci)| r * ci).collect()
    }

    /// `bar_c` of [`PrefixCoverage::difference`].
    pub fn feature(&self, c: &[f64]) -> Vec<f64> {
        bar_c(&self.difference(c))
    }

    pub fn push(&mut self, c: &[f64]) {
        for (r, ci) in self.remaining.iter_mut().zip(c) {
            *r *= 1.0 - ci;
        }
    }
}

/// Features `bar_c(x_{j_k} | x_{j_1}, ..., x_{j_{k-1}})` along a sequence of rows.
pub fn sequence_features(model: &CoverageModel, rows: &[usize]) -> Vec<Vec<f64>> {
    let mut prefix = PrefixCoverage::new(model.d_prime());
    rows.iter()
        .map(|&r| {
            let f = prefix.feature(model.coverage(r));
            prefix.push(model.coverage(r));
            f
        })
        .collect()
}
