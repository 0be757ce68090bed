//! Realized and expected reward of a retry sequence.

use crate::types::{OutcomeVector, RetrySequence, RewardProfile};
use crate::{Error, Result};

const PROB_FLOOR: f64 = 1e-12;

/// Reward collected by playing `j` against outcome `y`: `r_k` for a first
/// success at position `k`, `l_s` when all `s` attempts fail, `l_0` for the
/// empty sequence.
pub fn realized_reward(j: &RetrySequence, y: &OutcomeVector, profile: &RewardProfile) -> Result<f64> {
    j.check_round(y.len(), profile)?;
    for (k, &item) in j.iter().enumerate() {
        if y.bits()[item] {
            return Ok(profile.reward(k + 1));
        }
    }
    Ok(profile.loss(j.len()))
}

/// Expected reward of a sequence whose positions succeed (given all earlier
/// positions failed) with the probabilities in `probs`.
///
/// Evaluated by the backward recursion `E_{s+1} = l_s`,
/// `E_k = p_k r_k + (1 - p_k) E_{k+1}`. Probabilities are clamped into
/// `[1e-12, 1 - 1e-12]` first. Panics when `probs` is longer than the budget.
pub fn expected_reward(probs: &[f64], profile: &RewardProfile) -> f64 {
    let s = probs.len();
    assert!(s <= profile.budget(), "sequence longer than the budget");
    let mut value = profile.loss(s);
    for k in (0..s).rev() {
        let p = probs[k].clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        value = p * profile.reward(k + 1) + (1.0 - p) * value;
    }
    value
}

/// Checked variant of [`expected_reward`].
pub fn try_expected_reward(probs: &[f64], profile: &RewardProfile) -> Result<f64> {
    if probs.len() > profile.budget() {
        return Err(Error::BudgetExceeded {
            len: probs.len(),
            budget: profile.budget(),
        });
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter("probabilities must lie in [0, 1]"));
    }
    Ok(expected_reward(probs, profile))
}

/// Index of the best prefix length `s` in `0..=max_len`, where `value(s)` is
/// the expected reward of the length-`s` prefix. Ties go to the shorter prefix.
pub(crate) fn best_prefix(max_len: usize, mut value: impl FnMut(usize) -> f64) -> (usize, f64) {
    let mut best = (0, value(0));
    for s in 1..=max_len {
        let v = value(s);
        if v > best.1 {
            best = (s, v);
        }
    }
    best
}
