#![allow(dead_code)]

use cascade_core::RewardProfile;
use proptest::prelude::*;

/// Random valid profile with the given budget.
pub fn profile(budget: usize) -> impl Strategy<Value = RewardProfile> {
    (
        prop::collection::vec(0.01f64..=1.0, budget),
        prop::collection::vec(-1.0f64..-0.001, budget + 1),
    )
        .prop_map(|(mut r, mut l)| {
            r.sort_by(|a, b| b.total_cmp(a));
            l.sort_by(|a, b| b.total_cmp(a));
            RewardProfile::new(r, l).unwrap()
        })
}

/// Budget in `lo..=hi` together with a profile of that budget.
pub fn any_profile(lo: usize, hi: usize) -> impl Strategy<Value = RewardProfile> {
    (lo..=hi).prop_flat_map(profile)
}

/// Vector inside the closed unit ball.
pub fn unit_ball(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim).prop_map(|v| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1.0 {
            v.iter().map(|x| x / n).collect()
        } else {
            v
        }
    })
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
