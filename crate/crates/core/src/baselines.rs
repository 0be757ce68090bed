//! Comparison policies: uniform random, epsilon-greedy over the independent
//! policy, non-contextual CascadeUCB1, and a GLM policy refit by maximum
//! likelihood every round.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::invert_spd;
use crate::math::{self, dot, logistic_loss, sigmoid};
use crate::oracle::best_sorted_prefix;
use crate::policy::{IndPolicy, Selection};
use crate::types::{feedback_signs, ActionSet, FeedbackSign, ProjectedFeedback, RetrySequence, RewardProfile};
use crate::{Error, Result};

/// Uniform length in `0..=min(budget, k)`, then a uniform ordered subset of
/// that many distinct items.
pub fn random_policy<R: Rng + ?Sized>(k: usize, profile: &RewardProfile, rng: &mut R) -> RetrySequence {
    let max_len = profile.budget().min(k);
    let len = rng.random_range(0..=max_len);
    let mut items: Vec<usize> = (0..k).collect();
    for i in 0..len {
        let j = rng.random_range(i..k);
        items.swap(i, j);
    }
    items.truncate(len);
    RetrySequence::from_distinct(items)
}

/// Epsilon-greedy wrapper: with probability `eps` plays [`random_policy`],
/// otherwise the independent policy with zero exploration.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsGreedy {
    pub policy: IndPolicy,
    eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsChoice {
    pub sequence: RetrySequence,
    pub explored: bool,
}

impl EpsGreedy {
    pub fn new(policy: IndPolicy, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter("epsilon must lie in [0, 1]"));
        }
        Ok(Self { policy, eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn select<R: Rng + ?Sized>(
        &self,
        actions: &ActionSet,
        profile: &RewardProfile,
        rng: &mut R,
    ) -> Result<EpsChoice> {
        if rng.random::<f64>() < self.eps {
            return Ok(EpsChoice {
                sequence: random_policy(actions.len(), profile, rng),
                explored: true,
            });
        }
        let Selection { sequence, .. } = self.policy.select_with_alpha(actions, profile, 0.0)?;
        Ok(EpsChoice {
            sequence,
            explored: false,
        })
    }

    pub fn update(&mut self, played: &RetrySequence, actions: &ActionSet, fb: &ProjectedFeedback) -> Result<()> {
        self.policy.update(played, actions, fb)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArmStats {
    pub pulls: u64,
    pub successes: u64,
}

impl ArmStats {
    pub fn mean(&self) -> f64 {
        self.successes as f64 / self.pulls as f64
    }
}

/// Exploration constant inside the CascadeUCB1 square root.
pub const CASCADE_UCB_CONSTANT: f64 = 1.5;

/// CascadeUCB1 keyed by stable item id. Arms never seen get index 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CascadeUcb1 {
    stats: BTreeMap<u64, ArmStats>,
}

impl CascadeUcb1 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self, id: u64) -> ArmStats {
        self.stats.get(&id).copied().unwrap_or_default()
    }

    /// `min(1, mean + sqrt(1.5 ln t / n))`, or 1 for an unseen arm.
    pub fn index(stats: ArmStats, t: u64) -> f64 {
        if stats.pulls == 0 {
            return 1.0;
        }
        let bonus = math::sqrt(CASCADE_UCB_CONSTANT * math::ln(t.max(1) as f64) / stats.pulls as f64);
        (stats.mean() + bonus).min(1.0)
    }

    /// `t` is the 1-based round index.
    pub fn select(&self, actions: &ActionSet, profile: &RewardProfile, t: u64) -> RetrySequence {
        let indices: Vec<f64> = actions.ids().iter().map(|&id| Self::index(self.stats(id), t)).collect();
        let mut order: Vec<usize> = (0..actions.len()).collect();
        order.sort_by(|&a, &b| {
            indices[b]
                .total_cmp(&indices[a])
                .then(actions.id(a).cmp(&actions.id(b)))
        });
        best_sorted_prefix(&order, &indices, profile).0
    }

    pub fn update(&mut self, played: &RetrySequence, actions: &ActionSet, fb: &ProjectedFeedback) -> Result<()> {
        fb.check_against(played)?;
        let signs = feedback_signs(fb, played.len())?;
        for (&p, sign) in played.iter().zip(signs) {
            if p >= actions.len() {
                return Err(Error::IndexOutOfRange {
                    index: p,
                    len: actions.len(),
                });
            }
            if sign.is_observed() {
                let entry = self.stats.entry(actions.id(p)).or_default();
                entry.pulls += 1;
                entry.successes += u64::from(sign == FeedbackSign::Success);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged {
        iterations: usize,
    },
    /// Newton did not reach the tolerance; the previous fit was kept.
    NotConverged,
}

pub const GLM_MAX_ITERATIONS: usize = 50;
pub const GLM_GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_HALVINGS: usize = 40;

/// Logistic GLM fitted by L2-regularized maximum likelihood (damped Newton
/// with step halving), exploring with widths from the inverse Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmMle {
    dim: usize,
    lambda: f64,
    alpha_explore: f64,
    features: Vec<f64>,
    labels: Vec<f64>,
    w: Vec<f64>,
    hessian_inv: Vec<f64>,
}

impl GlmMle {
    pub fn new(dim: usize, lambda: f64, alpha_explore: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1"));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter("lambda must be positive"));
        }
        if !(alpha_explore.is_finite() && alpha_explore >= 0.0) {
            return Err(Error::InvalidParameter("alpha must be non-negative"));
        }
        let mut hessian_inv = alloc::vec![0.0; dim * dim];
        for i in 0..dim {
            hessian_inv[i * dim + i] = 1.0 / lambda;
        }
        Ok(Self {
            dim,
            lambda,
            alpha_explore,
            features: Vec::new(),
            labels: Vec::new(),
            w: alloc::vec![0.0; dim],
            hessian_inv,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn history_len(&self) -> usize {
        self.labels.len()
    }

    /// Adds one labelled observation.
    pub fn push(&mut self, x: &[f64], success: bool) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        self.features.extend_from_slice(x);
        self.labels.push(if success { 1.0 } else { -1.0 });
        Ok(())
    }

    /// Regularized negative log-likelihood at `w`.
    pub fn objective(&self, w: &[f64]) -> f64 {
        let loss: f64 = self
            .features
            .chunks_exact(self.dim)
            .zip(&self.labels)
            .map(|(x, &s)| logistic_loss(s * dot(x, w)))
            .sum();
        loss + 0.5 * self.lambda * dot(w, w)
    }

    /// Gradient of [`GlmMle::objective`].
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = w.iter().map(|wi| self.lambda * wi).collect();
        for (x, &s) in self.features.chunks_exact(self.dim).zip(&self.labels) {
            let c = -sigmoid(-s * dot(x, w)) * s;
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += c * xi;
            }
        }
        g
    }

    fn hessian(&self, w: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut h = alloc::vec![0.0; d * d];
        for i in 0..d {
            h[i * d + i] = self.lambda;
        }
        for x in self.features.chunks_exact(d) {
            let p = sigmoid(dot(x, w));
            let c = p * (1.0 - p);
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] += c * x[i] * x[j];
                }
            }
        }
        h
    }

    /// Refits from the current weights.
    pub fn fit(&mut self) -> Result<FitStatus> {
        let d = self.dim;
        let mut w = self.w.clone();
        let mut value = self.objective(&w);
        for iteration in 0..=GLM_MAX_ITERATIONS {
            let g = self.gradient(&w);
            let h_inv = invert_spd(&self.hessian(&w), d)?;
            if math::norm(&g) < GLM_GRADIENT_TOLERANCE {
                self.w = w;
                self.hessian_inv = h_inv;
                return Ok(FitStatus::Converged { iterations: iteration });
            }
            if iteration == GLM_MAX_ITERATIONS {
                break;
            }
            let step: Vec<f64> = h_inv.chunks_exact(d).map(|row| dot(row, &g)).collect();
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let candidate: Vec<f64> = w.iter().zip(&step).map(|(wi, si)| wi - scale * si).collect();
                let candidate_value = self.objective(&candidate);
                // near the optimum the decrease drops below f64 resolution;
                // a shrinking gradient still certifies progress there
                let stalled = candidate_value <= value + 1e-12 * (1.0 + value.abs())
                    && math::norm(&self.gradient(&candidate)) < math::norm(&g);
                if candidate_value < value || stalled {
                    w = candidate;
                    value = candidate_value;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                // no descent left at machine precision
                let h_inv = invert_spd(&self.hessian(&w), d)?;
                self.w = w;
                self.hessian_inv = h_inv;
                return Ok(FitStatus::Converged { iterations: iteration });
            }
        }
        log::warn!("GLM refit did not converge in {GLM_MAX_ITERATIONS} iterations; keeping previous fit");
        Ok(FitStatus::NotConverged)
    }

    /// Optimistic probabilities `sigmoid(w^T x + sqrt(alpha x^T H^{-1} x))`.
    pub fn ucb_probs(&self, actions: &ActionSet) -> Vec<f64> {
        actions
            .iter()
            .map(|x| {
                let hx: Vec<f64> = self.hessian_inv.chunks_exact(self.dim).map(|row| dot(row, x)).collect();
                sigmoid(dot(&self.w, x) + math::sqrt((dot(x, &hx) * self.alpha_explore).max(0.0)))
            })
            .collect()
    }

    /// Refits, then selects like the independent policy.
    pub fn select(&mut self, actions: &ActionSet, profile: &RewardProfile) -> Result<RetrySequence> {
        if !actions.is_empty() && actions.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: actions.dim(),
            });
        }
        self.fit()?;
        let probs = self.ucb_probs(actions);
        let order = crate::oracle::sort_by_score_desc(&probs);
        Ok(best_sorted_prefix(&order, &probs, profile).0)
    }

    /// Records every observed position of the played sequence.
    pub fn update(&mut self, played: &RetrySequence, actions: &ActionSet, fb: &ProjectedFeedback) -> Result<()> {
        fb.check_against(played)?;
        for (&p, &bit) in played.iter().zip(fb.observed()) {
            if p >= actions.len() {
                return Err(Error::IndexOutOfRange {
                    index: p,
                    len: actions.len(),
                });
            }
            self.push(actions.item(p), bit)?;
        }
        Ok(())
    }
}
