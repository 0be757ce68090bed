//! Domain types shared by every module: action sets, reward profiles, retry
//! sequences, outcomes and the feedback they reveal.
//!
//! Item indices are 0-based throughout.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

const NORM_SLACK: f64 = 1e-9;

/// The items available in one round: feature vectors of norm at most one,
/// each tagged with a stable identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    dim: usize,
    features: Vec<f64>,
    ids: Vec<u64>,
}

impl ActionSet {
    /// Builds an action set from row vectors.
    pub fn new(items: Vec<Vec<f64>>, ids: Vec<u64>) -> Result<Self> {
        if items.len() != ids.len() {
            return Err(Error::DimensionMismatch {
                expected: items.len(),
                found: ids.len(),
            });
        }
        let dim = items.first().map_or(1, Vec::len);
        let mut features = Vec::with_capacity(items.len() * dim);
        for row in &items {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(dim, features, ids)
    }

    /// Builds an action set from a row-major feature buffer.
    pub fn from_flat(dim: usize, features: Vec<f64>, ids: Vec<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("feature dimension must be at least 1"));
        }
        if features.len() != dim * ids.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * ids.len(),
                found: features.len(),
            });
        }
        if !math::all_finite(&features) {
            return Err(Error::NonFinite);
        }
        for (index, row) in features.chunks_exact(dim).enumerate() {
            let norm = math::norm(row);
            if norm > 1.0 + NORM_SLACK {
                return Err(Error::NormTooLarge { index, norm });
            }
        }
        let mut seen = BTreeSet::new();
        for &id in &ids {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id));
            }
        }
        Ok(Self { dim, features, ids })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Feature vector of item `index`. Panics when out of range.
    pub fn item(&self, index: usize) -> &[f64] {
        &self.features[index * self.dim..(index + 1) * self.dim]
    }

    pub fn id(&self, index: usize) -> u64 {
        self.ids[index]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }
}

/// Position-dependent rewards `r_1 >= r_2 >= ... > 0` and losses
/// `0 > l_0 >= l_1 >= ... >= -1` for one round. The budget is the number of
/// rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardProfile {
    rewards: Vec<f64>,
    losses: Vec<f64>,
}

impl RewardProfile {
    pub fn new(rewards: Vec<f64>, losses: Vec<f64>) -> Result<Self> {
        if losses.len() != rewards.len() + 1 {
            return Err(Error::InvalidProfile("losses must have one more entry than rewards"));
        }
        if !math::all_finite(&rewards) || !math::all_finite(&losses) {
            return Err(Error::NonFinite);
        }
        if rewards.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::InvalidProfile("rewards must lie in (0, 1]"));
        }
        if rewards.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidProfile("rewards must be non-increasing"));
        }
        if losses.iter().any(|&l| !(-1.0..0.0).contains(&l)) {
            return Err(Error::InvalidProfile("losses must lie in [-1, 0)"));
        }
        if losses.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidProfile("losses must be non-increasing"));
        }
        Ok(Self { rewards, losses })
    }

    pub fn budget(&self) -> usize {
        self.rewards.len()
    }

    /// Reward `r_position` for a first success at 1-based `position`.
    pub fn reward(&self, position: usize) -> f64 {
        self.rewards[position - 1]
    }

    /// Loss `l_failures` after giving up following `failures` failed attempts.
    pub fn loss(&self, failures: usize) -> f64 {
        self.losses[failures]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Largest reward attainable in the round (`r_1`, or `l_0` when the budget is zero).
    pub fn best_case(&self) -> f64 {
        self.rewards.first().copied().unwrap_or(self.losses[0])
    }
}

/// An ordered list of distinct item indices played in one round.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash, PartialOrd, Ord)]
pub struct RetrySequence(Vec<usize>);

impl RetrySequence {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Validates distinctness and that every index is below `item_count`.
    pub fn new(positions: Vec<usize>, item_count: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &p in &positions {
            if p >= item_count {
                return Err(Error::IndexOutOfRange {
                    index: p,
                    len: item_count,
                });
            }
            if !seen.insert(p) {
                return Err(Error::DuplicateIndex(p));
            }
        }
        Ok(Self(positions))
    }

    /// Caller guarantees distinct indices.
    pub(crate) fn from_distinct(positions: Vec<usize>) -> Self {
        debug_assert!({
            let set: BTreeSet<_> = positions.iter().collect();
            set.len() == positions.len()
        });
        Self(positions)
    }

    pub fn positions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self(self.0[..len.min(self.0.len())].to_vec())
    }

    /// Checks the sequence fits the round: valid indices and within budget.
    pub fn check_round(&self, item_count: usize, profile: &RewardProfile) -> Result<()> {
        if self.len() > profile.budget() {
            return Err(Error::BudgetExceeded {
                len: self.len(),
                budget: profile.budget(),
            });
        }
        match self.0.iter().find(|&&p| p >= item_count) {
            Some(&index) => Err(Error::IndexOutOfRange { index, len: item_count }),
            None => Ok(()),
        }
    }
}

impl core::ops::Deref for RetrySequence {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// One success bit per item of the round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeVector(pub Vec<bool>);

impl OutcomeVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

/// The observed prefix of the outcome along a played sequence: zero or more
/// failures, optionally terminated by one success.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProjectedFeedback {
    observed: Vec<bool>,
}

impl ProjectedFeedback {
    /// `failures` failed attempts and no success.
    pub fn failures(failures: usize) -> Self {
        Self {
            observed: alloc::vec![false; failures],
        }
    }

    /// `failures` failed attempts followed by a success.
    pub fn success_after(failures: usize) -> Self {
        let mut observed = alloc::vec![false; failures + 1];
        observed[failures] = true;
        Self { observed }
    }

    /// Validates that every entry before the last is a failure.
    pub fn from_observed(observed: Vec<bool>) -> Result<Self> {
        let n = observed.len();
        if n > 1 && observed[..n - 1].iter().any(|&b| b) {
            return Err(Error::InvalidFeedback("a success may only occur last"));
        }
        Ok(Self { observed })
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn terminated_by_success(&self) -> bool {
        self.observed.last().copied().unwrap_or(false)
    }

    /// 1-based position of the success, if any.
    pub fn success_position(&self) -> Option<usize> {
        self.terminated_by_success().then_some(self.observed.len())
    }

    /// Checks this feedback could have been produced by playing `played`:
    /// full length unless terminated early by a success.
    pub fn check_against(&self, played: &RetrySequence) -> Result<()> {
        if self.len() > played.len() {
            return Err(Error::InvalidFeedback("feedback longer than the played sequence"));
        }
        if !self.terminated_by_success() && self.len() != played.len() {
            return Err(Error::InvalidFeedback(
                "failure-only feedback must cover the whole sequence",
            ));
        }
        Ok(())
    }
}

/// Reveals the components of `y` in the order of `j`, up to and including the
/// first success.
pub fn project_feedback(y: &OutcomeVector, j: &RetrySequence) -> Result<ProjectedFeedback> {
    let mut observed = Vec::with_capacity(j.len());
    for &p in j.positions() {
        let bit = *y.0.get(p).ok_or(Error::IndexOutOfRange { index: p, len: y.len() })?;
        observed.push(bit);
        if bit {
            break;
        }
    }
    Ok(ProjectedFeedback { observed })
}

/// Three-valued per-position feedback used by the learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackSign {
    Success,
    Failure,
    Unobserved,
}

impl FeedbackSign {
    /// `+1`, `-1` or `0`.
    pub fn value(self) -> f64 {
        match self {
            FeedbackSign::Success => 1.0,
            FeedbackSign::Failure => -1.0,
            FeedbackSign::Unobserved => 0.0,
        }
    }

    pub fn is_observed(self) -> bool {
        self != FeedbackSign::Unobserved
    }
}

/// Signs for a sequence of length `len`; positions past the feedback are unobserved.
pub fn feedback_signs(fb: &ProjectedFeedback, len: usize) -> Result<Vec<FeedbackSign>> {
    if fb.len() > len {
        return Err(Error::InvalidFeedback("feedback longer than the played sequence"));
    }
    let mut signs: Vec<FeedbackSign> = fb
        .observed
        .iter()
        .map(|&b| {
            if b {
                FeedbackSign::Success
            } else {
                FeedbackSign::Failure
            }
        })
        .collect();
    signs.resize(len, FeedbackSign::Unobserved);
    Ok(signs)
}
