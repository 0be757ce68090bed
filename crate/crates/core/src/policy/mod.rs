//! Upper-confidence policies with online Newton updates.
//!
//! Both policies keep a logistic model `p = sigmoid(w^T x)` of success
//! probabilities. A round scores every candidate by the optimistic
//! probability `sigmoid(w^T x + sqrt(alpha * x^T M^{-1} x))`, orders the
//! candidates, and picks the prefix length maximizing the optimistic expected
//! reward. After feedback, every observed position runs one projected Newton
//! step on the logistic loss; unobserved positions are skipped.

mod dep;
mod ind;

pub use dep::DepPolicy;
pub use ind::IndPolicy;

use alloc::vec::Vec;

use crate::linalg::SpdState;
use crate::math::{self, dot, sigmoid};
use crate::types::{FeedbackSign, RetrySequence};
use crate::{Error, Result};

/// How the exploration scale `alpha` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exploration {
    /// A tuned constant.
    Fixed(f64),
    /// The confidence-derived value of [`compute_alpha`] for this horizon.
    Theoretical { horizon: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    /// Slab cap `D`: the learner keeps `|w^T x| <= D` on every updated direction.
    pub slab_cap: f64,
    pub exploration: Exploration,
    /// Scale of the Newton step.
    pub learning_rate: f64,
    /// Maximal budget `b`; `M` starts at `b * I`.
    pub max_budget: usize,
    /// Confidence level, only used by [`Exploration::Theoretical`].
    pub delta: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            slab_cap: 1.0,
            exploration: Exploration::Fixed(0.1),
            learning_rate: 1.0,
            max_budget: 10,
            delta: 0.1,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.slab_cap.is_finite() && self.slab_cap > 0.0) {
            return Err(Error::InvalidParameter("slab cap must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be positive"));
        }
        if self.max_budget == 0 {
            return Err(Error::InvalidParameter("maximal budget must be at least 1"));
        }
        match self.exploration {
            Exploration::Fixed(a) if !(a.is_finite() && a >= 0.0) => {
                return Err(Error::InvalidParameter("alpha must be non-negative"));
            }
            Exploration::Theoretical { horizon } => {
                if horizon == 0 {
                    return Err(Error::InvalidParameter("horizon must be at least 1"));
                }
                if !(self.delta > 0.0 && self.delta < 1.0 / core::f64::consts::E) {
                    return Err(Error::InvalidParameter("delta must lie in (0, 1/e)"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Exploration scale for a model of dimension `dim`.
    pub fn alpha(&self, dim: usize) -> f64 {
        match self.exploration {
            Exploration::Fixed(a) => a,
            Exploration::Theoretical { horizon } => {
                compute_alpha(self.max_budget, dim, horizon, self.delta, self.slab_cap)
            }
        }
    }
}

/// Confidence-derived exploration scale `alpha(b, d, T, delta)` for the
/// logistic link with slab cap `D`.
pub fn compute_alpha(b: usize, d: usize, horizon: u64, delta: f64, cap: f64) -> f64 {
    let b = b as f64;
    let d = d as f64;
    let t = horizon as f64;
    let c_sigma = math::exp(cap) / (1.0 + math::exp(cap));
    let c_sigma_prime = math::exp(-cap) / math::powi(1.0 + math::exp(-cap), 2);
    let ratio_sq = math::powi(c_sigma / c_sigma_prime, 2);
    let odds = c_sigma / (1.0 - c_sigma);
    let cap_sq = cap * cap;

    2.0 * b * cap_sq
        + ratio_sq * d * math::ln(1.0 + 2.0 / b * (t * odds + 4.0 * math::ln(4.0 * (t + 1.0) / delta)))
        + 2.0 * (12.0 * ratio_sq + 36.0 * (1.0 + cap) / c_sigma_prime) * math::ln(2.0 * b * (t + 4.0) / delta)
        + 20.0 * cap_sq * math::ln(2.0 * b * d * (t + 1.0) / delta)
}

/// Newton direction `sigmoid(-s * x^T w) * s * x` at the projected weights
/// `w`; the negative gradient of `log(1 + exp(-s * x^T w))`.
pub fn logistic_direction(x: &[f64], w: &[f64], sign: FeedbackSign) -> Vec<f64> {
    let s = sign.value();
    let scale = sigmoid(-s * dot(x, w)) * s;
    x.iter().map(|xi| scale * xi).collect()
}

/// A round's choice together with the optimistic quantities behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub sequence: RetrySequence,
    /// Optimistic expected reward of the chosen prefix.
    pub value: f64,
    /// Optimistic success probability of each position of the full ordering.
    pub ordered_probs: Vec<f64>,
}

/// Logistic learner: `M`, `w`, and the projected Newton step.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineNewton {
    spd: SpdState,
    w: Vec<f64>,
    slab_cap: f64,
    learning_rate: f64,
    update_count: u64,
}

impl OnlineNewton {
    pub fn new(dim: usize, cfg: &PolicyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            spd: SpdState::new(dim, cfg.max_budget as f64)?,
            w: alloc::vec![0.0; dim],
            slab_cap: cfg.slab_cap,
            learning_rate: cfg.learning_rate,
            update_count: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn set_weights(&mut self, w: Vec<f64>) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: w.len(),
            });
        }
        self.w = w;
        Ok(())
    }

    pub fn spd(&self) -> &SpdState {
        &self.spd
    }

    /// Sequence positions processed so far, observed or not.
    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    /// Optimistic success probability `sigmoid(w^T x + sqrt(alpha x^T M^{-1} x))`.
    pub fn ucb_prob(&self, x: &[f64], alpha: f64) -> f64 {
        sigmoid(dot(&self.w, x) + self.width(x, alpha))
    }

    /// Confidence width `sqrt(alpha * x^T M^{-1} x)`.
    pub fn width(&self, x: &[f64], alpha: f64) -> f64 {
        math::sqrt((self.spd.inv_quad(x) * alpha).max(0.0))
    }

    /// One position of the update. Observed positions project `w` onto the
    /// slab `|w^T x| <= D` (geometry of the current `M`), add `x x^T` to `M`,
    /// then take a Newton step with the updated inverse.
    pub fn step(&mut self, x: &[f64], sign: FeedbackSign) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if !sign.is_observed() {
            return Ok(());
        }
        let projected = self.spd.slab_project(&self.w, x, self.slab_cap)?;
        self.spd.rank_one_update(x, 1.0)?;
        let direction = logistic_direction(x, &projected, sign);
        let step = self.spd.inv_mul(&direction);
        self.w = projected
            .iter()
            .zip(&step)
            .map(|(wi, si)| wi + self.learning_rate * si)
            .collect();
        if !math::all_finite(&self.w) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Runs [`OnlineNewton::step`] over a round's features and signs.
    pub fn observe_round(&mut self, features: &[Vec<f64>], signs: &[FeedbackSign]) -> Result<()> {
        for (x, &sign) in features.iter().zip(signs) {
            self.step(x, sign)?;
        }
        self.update_count += signs.len() as u64;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Second transcription of the exploration scale, term by term.
    fn alpha_reference(b: f64, d: f64, t: f64, delta: f64, cap: f64) -> f64 {
        let e = core::f64::consts::E;
        let cs = libm::pow(e, cap) / (1.0 + libm::pow(e, cap));
        let csp = libm::pow(e, -cap) / ((1.0 + libm::pow(e, -cap)) * (1.0 + libm::pow(e, -cap)));
        let r = (cs / csp) * (cs / csp);
        let term1 = 2.0 * b * cap * cap;
        let inner = t * cs / (1.0 - cs) + 4.0 * libm::log(4.0 * (t + 1.0) / delta);
        let term2 = r * d * libm::log(1.0 + (2.0 / b) * inner);
        let term3 = 2.0 * (12.0 * r + 36.0 * (1.0 + cap) / csp) * libm::log(2.0 * b * (t + 4.0) / delta);
        let term4 = 20.0 * cap * cap * libm::log(2.0 * b * d * (t + 1.0) / delta);
        term1 + term2 + term3 + term4
    }

    #[test]
    fn alpha_matches_reference_transcription() {
        let a = compute_alpha(1, 1, 100, 0.1, 1.0);
        let r = alpha_reference(1.0, 1.0, 100.0, 0.1, 1.0);
        assert!((a - r).abs() < 1e-9, "{a} vs {r}");
        for &(b, d, t, delta, cap) in &[(5usize, 10usize, 20_000u64, 0.05, 2.0), (2, 3, 1, 0.3, 0.5)] {
            let a = compute_alpha(b, d, t, delta, cap);
            let r = alpha_reference(b as f64, d as f64, t as f64, delta, cap);
            assert!((a - r).abs() <= 1e-9 * r.abs());
        }
    }

    #[test]
    fn alpha_dominates_leading_term_and_grows_with_cap() {
        for &(b, d, t, delta, cap) in &[(1usize, 1usize, 1u64, 0.3, 0.1), (5, 4, 1000, 0.01, 3.0)] {
            let a = compute_alpha(b, d, t, delta, cap);
            assert!(a > 2.0 * b as f64 * cap * cap);
            assert!(compute_alpha(b, d, t, delta, 2.0 * cap) > a);
        }
    }

    #[test]
    fn one_dimensional_step() {
        let cfg = PolicyConfig {
            max_budget: 1,
            learning_rate: 1.0,
            slab_cap: 1.0,
            ..PolicyConfig::default()
        };
        let mut learner = OnlineNewton::new(1, &cfg).unwrap();
        learner.step(&[1.0], FeedbackSign::Failure).unwrap();
        assert_eq!(learner.spd().matrix(), &[2.0]);
        assert!((learner.weights()[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn unobserved_step_is_identity() {
        let mut learner = OnlineNewton::new(2, &PolicyConfig::default()).unwrap();
        learner.set_weights(vec![3.0, -1.0]).unwrap();
        let before = learner.clone();
        learner.step(&[0.5, 0.5], FeedbackSign::Unobserved).unwrap();
        assert_eq!(learner, before);
    }

    #[test]
    fn step_projects_before_newton() {
        let cfg = PolicyConfig {
            max_budget: 1,
            slab_cap: 0.5,
            ..PolicyConfig::default()
        };
        let mut learner = OnlineNewton::new(1, &cfg).unwrap();
        learner.set_weights(vec![4.0]).unwrap();
        learner.step(&[1.0], FeedbackSign::Success).unwrap();
        // projected to 0.5, then 0.5 + sigmoid(-0.5) / 2
        let expected = 0.5 + sigmoid(-0.5) / 2.0;
        assert!((learner.weights()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(PolicyConfig::default().validate().is_ok());
        let bad = PolicyConfig {
            slab_cap: 0.0,
            ..PolicyConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PolicyConfig {
            exploration: Exploration::Theoretical { horizon: 10 },
            delta: 0.5,
            ..PolicyConfig::default()
        };
        assert!(bad.validate().is_err());
        let good = PolicyConfig {
            exploration: Exploration::Theoretical { horizon: 10 },
            delta: 0.2,
            ..PolicyConfig::default()
        };
        assert!(good.alpha(3) > 0.0);
    }
}
