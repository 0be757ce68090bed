mod common;

use cascade_core::baselines::{random_policy, ArmStats, CascadeUcb1, EpsGreedy, FitStatus, GlmMle};
use cascade_core::policy::{IndPolicy, PolicyConfig};
use cascade_core::rng::stream;
use cascade_core::{ActionSet, ProjectedFeedback};
use proptest::prelude::*;

fn actions(items: Vec<Vec<f64>>) -> ActionSet {
    let k = items.len() as u64;
    ActionSet::new(items, (100..100 + k).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn every_baseline_respects_the_budget(
        items in prop::collection::vec(common::unit_ball(3), 0..9),
        prof in common::any_profile(0, 6),
        seed in any::<u64>(),
        t in 1u64..1000,
    ) {
        let k = items.len();
        let acts = actions(items);
        let cap = prof.budget().min(k);
        let mut rng = stream(seed, 0);
        prop_assert!(random_policy(k, &prof, &mut rng).len() <= cap);
        let eps = EpsGreedy::new(IndPolicy::new(3, PolicyConfig { max_budget: 6, ..PolicyConfig::default() }).unwrap(), 0.5).unwrap();
        prop_assert!(eps.select(&acts, &prof, &mut rng).unwrap().sequence.len() <= cap);
        prop_assert!(CascadeUcb1::new().select(&acts, &prof, t).len() <= cap);
        let mut glm = GlmMle::new(3, 1.0, 0.1).unwrap();
        prop_assert!(glm.select(&acts, &prof).unwrap().len() <= cap);
    }

    #[test]
    fn cascade_index_is_non_increasing_in_pulls(
        mean_num in 0u64..=20,
        pulls in 20u64..200,
        extra in 1u64..5,
        t in 2u64..10_000,
    ) {
        // same empirical mean at n and at a multiple of n
        let a = ArmStats { pulls, successes: mean_num * pulls / 20 };
        let b = ArmStats { pulls: pulls * (1 + extra), successes: a.successes * (1 + extra) };
        prop_assert!(CascadeUcb1::index(b, t) <= CascadeUcb1::index(a, t));
    }

    #[test]
    fn glm_fit_lowers_the_objective(
        history in prop::collection::vec((common::unit_ball(2), any::<bool>()), 1..40),
        lambda in 0.1f64..5.0,
    ) {
        let mut glm = GlmMle::new(2, lambda, 0.0).unwrap();
        for (x, y) in &history {
            glm.push(x, *y).unwrap();
        }
        let before = glm.objective(glm.weights());
        let status = glm.fit().unwrap();
        let converged = matches!(status, FitStatus::Converged { .. });
        prop_assert!(converged);
        prop_assert!(glm.objective(glm.weights()) <= before);
        let g = glm.gradient(glm.weights());
        prop_assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8);
    }

    #[test]
    fn cascade_counts_only_observed_positions(
        fails in 0usize..4,
        success in any::<bool>(),
    ) {
        let acts = actions(vec![vec![0.1, 0.0, 0.0]; 4]);
        let played = cascade_core::RetrySequence::new(vec![3, 2, 1, 0], 4).unwrap();
        let fb = if success { ProjectedFeedback::success_after(fails) } else { ProjectedFeedback::failures(4) };
        let mut ucb = CascadeUcb1::new();
        ucb.update(&played, &acts, &fb).unwrap();
        let pulls: u64 = (100..104).map(|id| ucb.stats(id).pulls).sum();
        prop_assert_eq!(pulls as usize, fb.len());
    }
}
