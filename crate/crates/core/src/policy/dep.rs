use alloc::vec::Vec;

use super::{OnlineNewton, PolicyConfig, Selection};
use crate::coverage::{sequence_features, CoverageModel, PrefixCoverage};
use crate::reward::{best_prefix, expected_reward};
use crate::types::{feedback_signs, ActionSet, ProjectedFeedback, RetrySequence, RewardProfile};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct CachedRound {
    ids: Vec<u64>,
    order: Vec<usize>,
    features: Vec<Vec<f64>>,
}

/// Greedy coverage UCB policy for dependent outcomes.
///
/// Features live in topic space: an item's feature is `bar_c` of its
/// coverage gain over the items ranked before it. The ordering is built
/// greedily by optimistic conditional probability, then the best prefix
/// length of that single ordering is played.
#[derive(Debug, Clone, PartialEq)]
pub struct DepPolicy {
    learner: OnlineNewton,
    cfg: PolicyConfig,
    alpha: f64,
    coverage: CoverageModel,
    cached: Option<CachedRound>,
}

impl DepPolicy {
    /// The coverage model must hold a row for every item id the policy will see.
    pub fn new(coverage: CoverageModel, cfg: PolicyConfig) -> Result<Self> {
        let dim = coverage.d_prime();
        let learner = OnlineNewton::new(dim, &cfg)?;
        let alpha = cfg.alpha(dim);
        Ok(Self {
            learner,
            cfg,
            alpha,
            coverage,
            cached: None,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn learner(&self) -> &OnlineNewton {
        &self.learner
    }

    pub fn coverage(&self) -> &CoverageModel {
        &self.coverage
    }

    pub fn set_weights(&mut self, w: Vec<f64>) -> Result<()> {
        self.learner.set_weights(w)
    }

    pub fn select(&mut self, actions: &ActionSet, profile: &RewardProfile) -> Result<Selection> {
        self.select_with_alpha(actions, profile, self.alpha)
    }

    pub fn select_with_alpha(&mut self, actions: &ActionSet, profile: &RewardProfile, alpha: f64) -> Result<Selection> {
        if profile.budget() > self.cfg.max_budget {
            return Err(Error::BudgetExceeded {
                len: profile.budget(),
                budget: self.cfg.max_budget,
            });
        }
        let rows = self.coverage.rows_for(actions.ids())?;
        let k = rows.len();
        let full = profile.budget().min(k);
        let mut prefix = PrefixCoverage::new(self.coverage.d_prime());
        let mut used = alloc::vec![false; k];
        let mut order = Vec::with_capacity(full);
        let mut features = Vec::with_capacity(full);
        let mut probs = Vec::with_capacity(full);
        for _ in 0..full {
            let mut best: Option<(usize, f64, Vec<f64>)> = None;
            for item in (0..k).filter(|&i| !used[i]) {
                let feature = prefix.feature(self.coverage.coverage(rows[item]));
                let p = self.learner.ucb_prob(&feature, alpha);
                if best.as_ref().is_none_or(|(_, bp, _)| p > *bp) {
                    best = Some((item, p, feature));
                }
            }
            let (item, p, feature) = best.expect("full <= k leaves a candidate");
            used[item] = true;
            prefix.push(self.coverage.coverage(rows[item]));
            order.push(item);
            features.push(feature);
            probs.push(p);
        }
        let (len, value) = best_prefix(full, |s| expected_reward(&probs[..s], profile));
        self.cached = Some(CachedRound {
            ids: actions.ids().to_vec(),
            order: order.clone(),
            features,
        });
        Ok(Selection {
            sequence: RetrySequence::from_distinct(order[..len].to_vec()),
            value,
            ordered_probs: probs,
        })
    }

    /// Conditional features of a played sequence, reusing those computed at
    /// selection time when the sequence is a prefix of the cached ordering.
    pub fn features_for(&self, played: &RetrySequence, actions: &ActionSet) -> Result<Vec<Vec<f64>>> {
        if let Some(cached) = &self.cached {
            if cached.ids == actions.ids() && cached.order.starts_with(played.positions()) {
                return Ok(cached.features[..played.len()].to_vec());
            }
        }
        let ids: Vec<u64> = played
            .iter()
            .map(|&p| {
                if p < actions.len() {
                    Ok(actions.id(p))
                } else {
                    Err(Error::IndexOutOfRange {
                        index: p,
                        len: actions.len(),
                    })
                }
            })
            .collect::<Result<_>>()?;
        let rows = self.coverage.rows_for(&ids)?;
        Ok(sequence_features(&self.coverage, &rows))
    }

    pub fn update(&mut self, played: &RetrySequence, actions: &ActionSet, fb: &ProjectedFeedback) -> Result<()> {
        fb.check_against(played)?;
        let features = self.features_for(played, actions)?;
        let signs = feedback_signs(fb, played.len())?;
        self.cached = None;
        self.learner.observe_round(&features, &signs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::bar_c;
    use crate::math::{dot, sigmoid};
    use crate::oracle::greedy_order;
    use crate::policy::Exploration;
    use alloc::vec;

    fn exponential(b: usize) -> RewardProfile {
        let r = (1..=b).map(|j| libm::pow(2.0, 1.0 - j as f64)).collect();
        let l = (0..=b).map(|j| 0.8 * libm::pow(2.0, -(j as f64)) - 1.0).collect();
        RewardProfile::new(r, l).unwrap()
    }

    fn actions_for(model: &CoverageModel) -> ActionSet {
        let items = (0..model.len()).map(|i| model.coverage(i).to_vec()).collect();
        // coverage rows here have norm <= 1
        ActionSet::new(items, model.ids().to_vec()).unwrap()
    }

    #[test]
    fn symmetric_items_follow_index_order() {
        let model = CoverageModel::new(vec![vec![0.3, 0.4]; 4]).unwrap();
        let mut policy = DepPolicy::new(
            model.clone(),
            PolicyConfig {
                max_budget: 4,
                ..PolicyConfig::default()
            },
        )
        .unwrap();
        let sel = policy
            .select(
                &actions_for(&model),
                &RewardProfile::new(vec![1.0; 3], vec![-1e-9; 4]).unwrap(),
            )
            .unwrap();
        assert_eq!(sel.sequence.positions(), &[0, 1, 2]);
    }

    #[test]
    fn single_topic_orders_by_marginal_gain() {
        // with one topic and w > 0, larger coverage gain means larger probability
        let model = CoverageModel::new(vec![vec![0.2], vec![0.9], vec![0.5]]).unwrap();
        let cfg = PolicyConfig {
            exploration: Exploration::Fixed(0.0),
            max_budget: 3,
            ..PolicyConfig::default()
        };
        let mut policy = DepPolicy::new(model.clone(), cfg).unwrap();
        policy.set_weights(vec![1.0]).unwrap();
        let prof = RewardProfile::new(vec![1.0; 3], vec![-1e-9; 4]).unwrap();
        let sel = policy.select(&actions_for(&model), &prof).unwrap();
        assert_eq!(sel.sequence.positions(), &[1, 2, 0]);
        // gains: 0.9, then 0.1*0.5 = 0.05, then 0.05*0.2 = 0.01
        let expected: Vec<f64> = [0.9, 0.05, 0.01].iter().map(|g| sigmoid(2.0 * g - 1.0)).collect();
        for (p, e) in sel.ordered_probs.iter().zip(&expected) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_exploration_matches_true_greedy() {
        let model = CoverageModel::new(vec![
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.2, 0.6],
            vec![0.4, 0.4, 0.2],
        ])
        .unwrap();
        let u = vec![1.5, 0.5, 1.0];
        let cfg = PolicyConfig {
            exploration: Exploration::Fixed(0.0),
            max_budget: 5,
            slab_cap: 3.0,
            ..PolicyConfig::default()
        };
        let mut policy = DepPolicy::new(model.clone(), cfg).unwrap();
        policy.set_weights(u.clone()).unwrap();
        let prof = exponential(5);
        let sel = policy.select(&actions_for(&model), &prof).unwrap();
        let truth = |prefix: &[usize], item: usize| {
            let diff = model.coverage_difference(prefix, item).unwrap();
            sigmoid(dot(&bar_c(&diff), &u))
        };
        let greedy = greedy_order(truth, 5, 5);
        assert!(greedy.positions().starts_with(sel.sequence.positions()));
        let cached = policy.features_for(&sel.sequence, &actions_for(&model)).unwrap();
        assert_eq!(cached.len(), sel.sequence.len());
    }

    #[test]
    fn first_position_feature_is_bar_c_of_coverage() {
        let model = CoverageModel::new(vec![vec![0.7, 0.2], vec![0.1, 0.8]]).unwrap();
        let policy = DepPolicy::new(model.clone(), PolicyConfig::default()).unwrap();
        let actions = actions_for(&model);
        let played = RetrySequence::new(vec![1, 0], 2).unwrap();
        let f = policy.features_for(&played, &actions).unwrap();
        assert_eq!(f[0], bar_c(model.coverage(1)));
        let diff = model.coverage_difference(&[1], 0).unwrap();
        for (a, b) in f[1].iter().zip(&bar_c(&diff)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn unobserved_positions_leave_state_alone() {
        let model = CoverageModel::new(vec![vec![0.7, 0.2], vec![0.1, 0.8]]).unwrap();
        let mut policy = DepPolicy::new(model.clone(), PolicyConfig::default()).unwrap();
        let actions = actions_for(&model);
        let played = RetrySequence::new(vec![0, 1], 2).unwrap();
        policy
            .update(&played, &actions, &ProjectedFeedback::success_after(0))
            .unwrap();
        let mut single = DepPolicy::new(model, PolicyConfig::default()).unwrap();
        single
            .update(
                &RetrySequence::new(vec![0], 2).unwrap(),
                &actions,
                &ProjectedFeedback::success_after(0),
            )
            .unwrap();
        assert_eq!(policy.learner().weights(), single.learner().weights());
        assert_eq!(policy.learner().spd(), single.learner().spd());
    }

    #[test]
    fn unknown_items_are_rejected() {
        let model = CoverageModel::new(vec![vec![0.7, 0.2]]).unwrap();
        let mut policy = DepPolicy::new(model, PolicyConfig::default()).unwrap();
        let actions = ActionSet::new(vec![vec![0.1, 0.1]], vec![42]).unwrap();
        assert!(policy.select(&actions, &exponential(2)).is_err());
    }
}
