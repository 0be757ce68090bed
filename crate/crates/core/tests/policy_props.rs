mod common;

use cascade_core::coverage::CoverageModel;
use cascade_core::math::{dot, logistic_loss};
use cascade_core::policy::{logistic_direction, DepPolicy, Exploration, IndPolicy, OnlineNewton, PolicyConfig};
use cascade_core::reward::expected_reward;
use cascade_core::{ActionSet, FeedbackSign, ProjectedFeedback, RetrySequence, RewardProfile};
use proptest::prelude::*;

fn sign_strategy() -> impl Strategy<Value = FeedbackSign> {
    prop_oneof![Just(FeedbackSign::Success), Just(FeedbackSign::Failure)]
}

/// Central differences of `w -> log(1 + exp(-s x^T w))`.
fn numeric_gradient(x: &[f64], w: &[f64], sign: FeedbackSign) -> Vec<f64> {
    let h = 1e-5;
    let loss = |w: &[f64]| logistic_loss(sign.value() * dot(x, w));
    (0..w.len())
        .map(|i| {
            let mut up = w.to_vec();
            let mut down = w.to_vec();
            up[i] += h;
            down[i] -= h;
            (loss(&up) - loss(&down)) / (2.0 * h)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    diff / scale
}

fn config(alpha: f64, budget: usize) -> PolicyConfig {
    PolicyConfig {
        exploration: Exploration::Fixed(alpha),
        max_budget: budget,
        slab_cap: 2.0,
        ..PolicyConfig::default()
    }
}

fn vanilla(b: usize) -> RewardProfile {
    RewardProfile::new(vec![1.0; b], vec![-1e-9; b + 1]).unwrap()
}

/// A learner after a random history, plus a fresh feature and sign.
fn learner_case() -> impl Strategy<Value = (OnlineNewton, Vec<f64>, FeedbackSign)> {
    (1usize..=6).prop_flat_map(|d| {
        (
            prop::collection::vec((common::unit_ball(d), sign_strategy()), 0..20),
            prop::collection::vec(-2.0f64..2.0, d),
            common::unit_ball(d),
            sign_strategy(),
        )
            .prop_map(move |(history, w, x, sign)| {
                let mut learner = OnlineNewton::new(d, &config(0.1, 5)).unwrap();
                for (hx, hs) in &history {
                    learner.step(hx, *hs).unwrap();
                }
                learner.set_weights(w).unwrap();
                (learner, x, sign)
            })
    })
}

fn coverage_case() -> impl Strategy<Value = (CoverageModel, Vec<f64>, usize, Vec<usize>)> {
    (2usize..=6, 1usize..=4).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(0.0f64..=1.0, d), n),
            prop::collection::vec(-2.0f64..2.0, d),
            1..=n,
            Just(n),
        )
            .prop_map(|(rows, w, len, n)| {
                let order: Vec<usize> = (0..n).rev().take(len).collect();
                (CoverageModel::new(rows).unwrap(), w, n, order)
            })
    })
}

fn coverage_actions(model: &CoverageModel) -> ActionSet {
    let d = model.d_prime() as f64;
    // scaled so every row sits in the unit ball
    let items = (0..model.len())
        .map(|i| model.coverage(i).iter().map(|c| c / d.sqrt()).collect())
        .collect();
    ActionSet::new(items, model.ids().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ind_direction_is_negative_loss_gradient((learner, x, sign) in learner_case()) {
        let d = x.len();
        let ind = IndPolicy::new(d, config(0.1, 5)).unwrap();
        let cap = ind.config().slab_cap;
        let projected = learner.spd().slab_project(learner.weights(), &x, cap);
        prop_assume!(projected.is_ok());
        let w = projected.unwrap();
        let analytic: Vec<f64> = logistic_direction(&x, &w, sign).iter().map(|v| -v).collect();
        prop_assert!(relative_error(&analytic, &numeric_gradient(&x, &w, sign)) <= 1e-6);
    }

    #[test]
    fn step_is_projection_then_newton((learner, x, sign) in learner_case()) {
        prop_assume!(dot(&x, &x) > 1e-6);
        let mut stepped = learner.clone();
        stepped.step(&x, sign).unwrap();
        let projected = learner.spd().slab_project(learner.weights(), &x, 2.0).unwrap();
        prop_assert!(dot(&projected, &x).abs() <= 2.0 + 1e-9);
        let mut spd = learner.spd().clone();
        spd.rank_one_update(&x, 1.0).unwrap();
        let dir = spd.inv_mul(&logistic_direction(&x, &projected, sign));
        let expected: Vec<f64> = projected.iter().zip(&dir).map(|(a, b)| a + b).collect();
        prop_assert!(common::max_abs_diff(stepped.weights(), &expected) <= 1e-12);
    }

    #[test]
    fn dep_direction_is_negative_loss_gradient(
        (model, w, n, order) in coverage_case(),
        signs_seed in prop::collection::vec(sign_strategy(), 6),
    ) {
        let actions = coverage_actions(&model);
        let policy = DepPolicy::new(model, config(0.1, 6)).unwrap();
        let played = RetrySequence::new(order, n).unwrap();
        let features = policy.features_for(&played, &actions).unwrap();
        for (f, &sign) in features.iter().zip(&signs_seed) {
            prop_assert!(dot(f, f) <= 1.0 + 1e-12);
            let analytic: Vec<f64> = logistic_direction(f, &w, sign).iter().map(|v| -v).collect();
            prop_assert!(relative_error(&analytic, &numeric_gradient(f, &w, sign)) <= 1e-6);
        }
    }

    #[test]
    fn wider_exploration_never_lowers_optimism(
        (learner, x, _sign) in learner_case(),
        a in 0.0f64..5.0,
        extra in 0.0f64..5.0,
    ) {
        prop_assert!(learner.width(&x, a + extra) >= learner.width(&x, a));
        prop_assert!(learner.ucb_prob(&x, a + extra) >= learner.ucb_prob(&x, a));
    }

    #[test]
    fn optimistic_value_of_a_fixed_sequence_grows_with_alpha(
        (learner, _x, _sign) in learner_case(),
        items in prop::collection::vec(common::unit_ball(6), 1..=5),
        a in 0.0f64..5.0,
        extra in 0.0f64..5.0,
    ) {
        let d = learner.dim();
        let items: Vec<Vec<f64>> = items.into_iter().map(|x| x[..d].to_vec()).collect();
        let prof = vanilla(5);
        let value = |alpha: f64| {
            let p: Vec<f64> = items.iter().map(|x| learner.ucb_prob(x, alpha)).collect();
            expected_reward(&p, &prof)
        };
        prop_assert!(value(a + extra) >= value(a) - 1e-12);
    }

    #[test]
    fn selection_is_deterministic_and_within_budget(
        (learner, _x, _sign) in learner_case(),
        items in prop::collection::vec(common::unit_ball(6), 1..=9),
        b in 0usize..=5,
    ) {
        let d = learner.dim();
        let k = items.len();
        let actions = ActionSet::new(items.into_iter().map(|x| x[..d].to_vec()).collect(), (0..k as u64).collect()).unwrap();
        let mut policy = IndPolicy::new(d, config(0.1, 5)).unwrap();
        policy.set_weights(learner.weights().to_vec()).unwrap();
        let first = policy.select(&actions, &vanilla(b)).unwrap();
        let second = policy.select(&actions, &vanilla(b)).unwrap();
        prop_assert!(first.sequence.len() <= b.min(k));
        prop_assert_eq!(first, second);
    }

    #[test]
    fn ind_update_keeps_counts_and_finiteness(
        (learner, _x, _sign) in learner_case(),
        items in prop::collection::vec(common::unit_ball(6), 1..=6),
        fails in 0usize..6,
        success in any::<bool>(),
    ) {
        let d = learner.dim();
        let k = items.len();
        let actions = ActionSet::new(items.into_iter().map(|x| x[..d].to_vec()).collect(), (0..k as u64).collect()).unwrap();
        let played = RetrySequence::new((0..k).collect(), k).unwrap();
        let fails = fails.min(k);
        let fb = if success && fails < k { ProjectedFeedback::success_after(fails) } else { ProjectedFeedback::failures(fails.min(k)) };
        prop_assume!(fb.len() == k || fb.terminated_by_success());
        let mut policy = IndPolicy::new(d, config(0.1, 6)).unwrap();
        policy.update(&played, &actions, &fb).unwrap();
        prop_assert_eq!(policy.learner().update_count(), k as u64);
        prop_assert!(policy.learner().weights().iter().all(|v| v.is_finite()));
    }
}
