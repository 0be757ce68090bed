//! Bayes-optimal sequences.
//!
//! Under independent outcomes the optimum is a prefix of the items sorted by
//! marginal success probability; the best length has to be found by trying
//! every prefix, since the value is not unimodal in the length. For dependent
//! outcomes only a desk-scale exhaustive search and the greedy ordering are
//! provided.

use alloc::vec::Vec;

use crate::reward::{best_prefix, expected_reward};
use crate::types::{RetrySequence, RewardProfile};
use crate::{Error, Result};

/// Largest item count accepted by [`brute_force_bayes`].
pub const BRUTE_FORCE_MAX_ITEMS: usize = 10;
/// Largest effective sequence length accepted by [`brute_force_bayes`].
pub const BRUTE_FORCE_MAX_LEN: usize = 6;

/// Item indices sorted by score, largest first; ties keep the smaller index first.
pub fn sort_by_score_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Best prefix of `order` under the per-item probabilities `probs`, searching
/// every length `0..=min(budget, order.len())`.
pub fn best_sorted_prefix(order: &[usize], probs: &[f64], profile: &RewardProfile) -> (RetrySequence, f64) {
    let max_len = profile.budget().min(order.len());
    let sorted: Vec<f64> = order[..max_len].iter().map(|&i| probs[i]).collect();
    let (len, value) = best_prefix(max_len, |s| expected_reward(&sorted[..s], profile));
    (RetrySequence::from_distinct(order[..len].to_vec()), value)
}

/// Bayes-optimal sequence and its expected reward for independent outcomes
/// with marginal success probabilities `probs`.
pub fn bayes_sequence_independent(probs: &[f64], profile: &RewardProfile) -> (RetrySequence, f64) {
    let order = sort_by_score_desc(probs);
    best_sorted_prefix(&order, probs, profile)
}

/// Exhaustive search over every ordered sequence of distinct items of length
/// `0..=min(budget, k)`.
///
/// `cond_prob(prefix, item)` is the probability that `item` succeeds given
/// that every item of `prefix` failed. Ties keep the lexicographically
/// smallest sequence.
pub fn brute_force_bayes<F>(cond_prob: F, k: usize, profile: &RewardProfile) -> Result<(RetrySequence, f64)>
where
    F: Fn(&[usize], usize) -> f64,
{
    let max_len = profile.budget().min(k);
    if k > BRUTE_FORCE_MAX_ITEMS || max_len > BRUTE_FORCE_MAX_LEN {
        return Err(Error::TooLarge {
            items: k,
            budget: profile.budget(),
        });
    }
    struct Search<'a, F> {
        cond_prob: F,
        k: usize,
        max_len: usize,
        profile: &'a RewardProfile,
        prefix: Vec<usize>,
        probs: Vec<f64>,
        used: Vec<bool>,
        best: (Vec<usize>, f64),
    }
    impl<F: Fn(&[usize], usize) -> f64> Search<'_, F> {
        // pre-order DFS with increasing child indices visits sequences in lexicographic order
        fn visit(&mut self) {
            let value = expected_reward(&self.probs, self.profile);
            if value > self.best.1 {
                self.best = (self.prefix.clone(), value);
            }
            if self.prefix.len() == self.max_len {
                return;
            }
            for item in 0..self.k {
                if self.used[item] {
                    continue;
                }
                let p = (self.cond_prob)(&self.prefix, item);
                self.used[item] = true;
                self.prefix.push(item);
                self.probs.push(p);
                self.visit();
                self.probs.pop();
                self.prefix.pop();
                self.used[item] = false;
            }
        }
    }
    let mut search = Search {
        cond_prob,
        k,
        max_len,
        profile,
        prefix: Vec::new(),
        probs: Vec::new(),
        used: alloc::vec![false; k],
        best: (Vec::new(), f64::NEG_INFINITY),
    };
    search.visit();
    let (seq, value) = search.best;
    Ok((RetrySequence::from_distinct(seq), value))
}

/// Greedy ordering: repeatedly append the unchosen item with the largest
/// conditional success probability given the chosen prefix. Returns the
/// ordering and the conditional probability of each chosen item.
pub fn greedy_order_with_probs<F>(cond_prob: F, k: usize, s: usize) -> (RetrySequence, Vec<f64>)
where
    F: Fn(&[usize], usize) -> f64,
{
    let s = s.min(k);
    let mut chosen = Vec::with_capacity(s);
    let mut probs = Vec::with_capacity(s);
    let mut used = alloc::vec![false; k];
    for _ in 0..s {
        let mut best: Option<(usize, f64)> = None;
        let mut scanned = Vec::new();
        for item in (0..k).filter(|&i| !used[i]) {
            let p = cond_prob(&chosen, item);
            scanned.push(p);
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((item, p));
            }
        }
        let (item, p) = best.expect("s <= k leaves a candidate");
        debug_assert!(scanned.iter().all(|&q| q <= p));
        used[item] = true;
        chosen.push(item);
        probs.push(p);
    }
    (RetrySequence::from_distinct(chosen), probs)
}

/// [`greedy_order_with_probs`] without the probabilities.
pub fn greedy_order<F>(cond_prob: F, k: usize, s: usize) -> RetrySequence
where
    F: Fn(&[usize], usize) -> f64,
{
    greedy_order_with_probs(cond_prob, k, s).0
}

/// Greedy ordering to full length followed by the prefix-length search; the
/// benchmark used for dependent outcomes beyond desk scale.
pub fn greedy_sequence<F>(cond_prob: F, k: usize, profile: &RewardProfile) -> (RetrySequence, f64)
where
    F: Fn(&[usize], usize) -> f64,
{
    let (order, probs) = greedy_order_with_probs(cond_prob, k, profile.budget());
    let (len, value) = best_prefix(order.len(), |s| expected_reward(&probs[..s], profile));
    (order.truncated(len), value)
}
