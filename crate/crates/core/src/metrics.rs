//! Run-level metrics.

use alloc::vec::Vec;

/// Normalized cumulative reward `(cr - cr_rand) / (cr_max - cr_rand)`.
///
/// `None` when the normalizer is not positive.
pub fn ncr(cr: f64, cr_rand: f64, cr_max: f64) -> Option<f64> {
    let span = cr_max - cr_rand;
    (span > 0.0).then(|| (cr - cr_rand) / span)
}

/// Running sums of a per-round series.
pub fn cumulative(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Cumulative regret from per-round oracle and policy expected rewards.
pub fn regret_curve(oracle_values: &[f64], policy_values: &[f64]) -> Vec<f64> {
    assert_eq!(oracle_values.len(), policy_values.len(), "series lengths differ");
    let gaps: Vec<f64> = oracle_values.iter().zip(policy_values).map(|(o, p)| o - p).collect();
    cumulative(&gaps)
}
