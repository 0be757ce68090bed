use alloc::vec::Vec;

use super::{OnlineNewton, PolicyConfig, Selection};
use crate::oracle::{best_sorted_prefix, sort_by_score_desc};
use crate::types::{feedback_signs, ActionSet, ProjectedFeedback, RetrySequence, RewardProfile};
use crate::{Error, Result};

/// UCB policy for independent outcomes: items are ranked by their optimistic
/// marginal success probability and the best prefix length is searched
/// exactly as the Bayes oracle would with known probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct IndPolicy {
    learner: OnlineNewton,
    cfg: PolicyConfig,
    alpha: f64,
}

impl IndPolicy {
    pub fn new(dim: usize, cfg: PolicyConfig) -> Result<Self> {
        let learner = OnlineNewton::new(dim, &cfg)?;
        let alpha = cfg.alpha(dim);
        Ok(Self { learner, cfg, alpha })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn learner(&self) -> &OnlineNewton {
        &self.learner
    }

    pub fn set_weights(&mut self, w: Vec<f64>) -> Result<()> {
        self.learner.set_weights(w)
    }

    fn check_round(&self, actions: &ActionSet, profile: &RewardProfile) -> Result<()> {
        if !actions.is_empty() && actions.dim() != self.learner.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.learner.dim(),
                found: actions.dim(),
            });
        }
        if profile.budget() > self.cfg.max_budget {
            return Err(Error::BudgetExceeded {
                len: profile.budget(),
                budget: self.cfg.max_budget,
            });
        }
        Ok(())
    }

    /// Optimistic probability of every item of the round.
    pub fn ucb_probs(&self, actions: &ActionSet, alpha: f64) -> Vec<f64> {
        actions.iter().map(|x| self.learner.ucb_prob(x, alpha)).collect()
    }

    pub fn select(&self, actions: &ActionSet, profile: &RewardProfile) -> Result<Selection> {
        self.select_with_alpha(actions, profile, self.alpha)
    }

    /// Selection with an explicit exploration scale (`0` is pure exploitation).
    pub fn select_with_alpha(&self, actions: &ActionSet, profile: &RewardProfile, alpha: f64) -> Result<Selection> {
        self.check_round(actions, profile)?;
        let probs = self.ucb_probs(actions, alpha);
        let order = sort_by_score_desc(&probs);
        let (sequence, value) = best_sorted_prefix(&order, &probs, profile);
        let full = profile.budget().min(order.len());
        Ok(Selection {
            sequence,
            value,
            ordered_probs: order[..full].iter().map(|&i| probs[i]).collect(),
        })
    }

    /// Processes the feedback of a played sequence, position by position.
    pub fn update(&mut self, played: &RetrySequence, actions: &ActionSet, fb: &ProjectedFeedback) -> Result<()> {
        fb.check_against(played)?;
        if let Some(&index) = played.iter().find(|&&p| p >= actions.len()) {
            return Err(Error::IndexOutOfRange {
                index,
                len: actions.len(),
            });
        }
        let signs = feedback_signs(fb, played.len())?;
        let features: Vec<Vec<f64>> = played.iter().map(|&p| actions.item(p).to_vec()).collect();
        self.learner.observe_round(&features, &signs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{dot, sigmoid};
    use crate::oracle::bayes_sequence_independent;
    use crate::policy::Exploration;
    use crate::reward::expected_reward;
    use crate::rng::{stream, unit_ball};
    use alloc::vec;

    fn vanilla(b: usize) -> RewardProfile {
        RewardProfile::new(vec![1.0; b], vec![-1e-9; b + 1]).unwrap()
    }

    fn exponential(b: usize) -> RewardProfile {
        let r = (1..=b).map(|j| libm::pow(2.0, 1.0 - j as f64)).collect();
        let l = (0..=b).map(|j| 0.8 * libm::pow(2.0, -(j as f64)) - 1.0).collect();
        RewardProfile::new(r, l).unwrap()
    }

    fn random_actions(seed: u64, k: usize, d: usize) -> ActionSet {
        let mut rng = stream(seed, 0);
        let items = (0..k).map(|_| unit_ball(&mut rng, d)).collect();
        ActionSet::new(items, (0..k as u64).collect()).unwrap()
    }

    #[test]
    fn cold_start_plays_first_items_by_index() {
        let policy = IndPolicy::new(
            3,
            PolicyConfig {
                max_budget: 4,
                ..PolicyConfig::default()
            },
        )
        .unwrap();
        // identical norms so every width is equal under M = bI
        let items = vec![
            vec![0.6, 0.0, 0.0],
            vec![0.0, 0.6, 0.0],
            vec![0.0, 0.0, 0.6],
            vec![0.0, -0.6, 0.0],
            vec![-0.6, 0.0, 0.0],
        ];
        let actions = ActionSet::new(items, vec![10, 11, 12, 13, 14]).unwrap();
        let sel = policy.select(&actions, &vanilla(3)).unwrap();
        assert_eq!(sel.sequence.positions(), &[0, 1, 2]);
    }

    #[test]
    fn zero_exploration_with_true_weights_matches_bayes() {
        let d = 4;
        let mut rng = stream(3, 1);
        let u: Vec<f64> = unit_ball(&mut rng, d).into_iter().map(|v| 2.0 * v).collect();
        let cfg = PolicyConfig {
            exploration: Exploration::Fixed(0.0),
            max_budget: 5,
            slab_cap: 2.0,
            ..PolicyConfig::default()
        };
        let mut policy = IndPolicy::new(d, cfg).unwrap();
        policy.set_weights(u.clone()).unwrap();
        for seed in 0..20 {
            let actions = random_actions(100 + seed, 8, d);
            let truth: Vec<f64> = actions.iter().map(|x| sigmoid(dot(&u, x))).collect();
            let prof = exponential(5);
            let sel = policy.select(&actions, &prof).unwrap();
            let (_, bayes) = bayes_sequence_independent(&truth, &prof);
            assert_eq!(sel.value, bayes);
        }
    }

    #[test]
    fn selection_value_is_best_sorted_prefix() {
        let d = 3;
        let mut policy = IndPolicy::new(
            d,
            PolicyConfig {
                max_budget: 5,
                ..PolicyConfig::default()
            },
        )
        .unwrap();
        let mut rng = stream(4, 2);
        policy.set_weights(unit_ball(&mut rng, d)).unwrap();
        for seed in 0..20 {
            let actions = random_actions(200 + seed, 7, d);
            let prof = exponential(5);
            let sel = policy.select(&actions, &prof).unwrap();
            let probs = policy.ucb_probs(&actions, policy.alpha());
            let order = sort_by_score_desc(&probs);
            let scan = (0..=5)
                .map(|s| {
                    let p: Vec<f64> = order[..s].iter().map(|&i| probs[i]).collect();
                    expected_reward(&p, &prof)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(sel.value, scan);
        }
    }

    #[test]
    fn update_skips_unobserved_tail() {
        let d = 2;
        let mut policy = IndPolicy::new(
            d,
            PolicyConfig {
                max_budget: 3,
                ..PolicyConfig::default()
            },
        )
        .unwrap();
        let actions = ActionSet::new(vec![vec![0.5, 0.0], vec![0.0, 0.5], vec![0.3, 0.3]], vec![1, 2, 3]).unwrap();
        let played = RetrySequence::new(vec![2, 0, 1], 3).unwrap();
        policy
            .update(&played, &actions, &ProjectedFeedback::success_after(0))
            .unwrap();
        assert_eq!(policy.learner().update_count(), 3);
        // only the first position touched M
        let m = policy.learner().spd().matrix();
        assert!((m[0] - (3.0 + 0.09)).abs() < 1e-15);
        assert!((m[3] - (3.0 + 0.09)).abs() < 1e-15);
    }

    #[test]
    fn update_rejects_inconsistent_feedback() {
        let mut policy = IndPolicy::new(1, PolicyConfig::default()).unwrap();
        let actions = ActionSet::new(vec![vec![0.5], vec![0.1]], vec![1, 2]).unwrap();
        let played = RetrySequence::new(vec![0, 1], 2).unwrap();
        assert!(policy
            .update(&played, &actions, &ProjectedFeedback::failures(1))
            .is_err());
        assert!(policy
            .update(&played, &actions, &ProjectedFeedback::failures(3))
            .is_err());
    }

    #[test]
    fn budget_above_configuration_is_rejected() {
        let policy = IndPolicy::new(
            2,
            PolicyConfig {
                max_budget: 2,
                ..PolicyConfig::default()
            },
        )
        .unwrap();
        let actions = random_actions(1, 4, 2);
        assert!(policy.select(&actions, &vanilla(3)).is_err());
    }
}
