//! Environments: reward scenarios, synthetic independent and dependent
//! generators, and chunked fixed-probability datasets.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::coverage::{CoverageModel, PrefixCoverage};
use crate::math::{self, dot, sigmoid};
use crate::rng::{self, purpose, StreamRng};
use crate::types::{ActionSet, OutcomeVector, ProjectedFeedback, RetrySequence, RewardProfile};
use crate::{Error, Result};

/// Stand-in for the zero losses of the vanilla scenario; losses must be
/// strictly negative.
pub const VANILLA_LOSS: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// `r_j = 1`, `l_j = 0` (encoded as [`VANILLA_LOSS`]).
    Vanilla,
    /// `r_j = 2^{1-j}`, `l_j = (4/5) 2^{-j} - 1`.
    Exponential,
    /// Explicit schedules, truncated to the round budget.
    Custom { rewards: Vec<f64>, losses: Vec<f64> },
}

impl Scenario {
    pub fn profile(&self, budget: usize) -> Result<RewardProfile> {
        scenario_profile(self, budget)
    }
}

pub fn scenario_profile(kind: &Scenario, budget: usize) -> Result<RewardProfile> {
    match kind {
        Scenario::Vanilla => RewardProfile::new(vec![1.0; budget], vec![VANILLA_LOSS; budget + 1]),
        Scenario::Exponential => {
            let rewards = (1..=budget).map(|j| math::powi(0.5, j as i32 - 1)).collect();
            // (4 - 5 2^j) / (5 2^j) has exact operands, so each loss is correctly rounded
            let losses = (0..=budget)
                .map(|j| {
                    let scale = 5.0 * math::powi(2.0, j as i32);
                    (4.0 - scale) / scale
                })
                .collect();
            RewardProfile::new(rewards, losses)
        }
        Scenario::Custom { rewards, losses } => {
            if rewards.len() < budget || losses.len() < budget + 1 {
                return Err(Error::InvalidProfile("custom schedule shorter than the budget"));
            }
            RewardProfile::new(rewards[..budget].to_vec(), losses[..=budget].to_vec())
        }
    }
}

/// Ground truth a round exposes for regret computation.
#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    /// Marginal success probability per item; outcomes are independent.
    Independent(Vec<f64>),
    /// Conditional probabilities come from the environment's coverage model.
    Dependent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    /// 1-based round index.
    pub t: u64,
    pub actions: ActionSet,
    pub profile: RewardProfile,
    pub truth: Truth,
}

/// Synthetic independent-outcome environment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Hidden parameter `u`; its length is the feature dimension.
    pub u: Vec<f64>,
    pub items_per_round: usize,
    pub budget: usize,
    pub horizon: u64,
    pub seed: u64,
    /// Bound `D` with `|u^T x| <= D` for every item.
    pub slab_cap: f64,
    /// When set, items are drawn from a fixed catalogue with stable ids;
    /// otherwise every round gets fresh items.
    pub catalog_size: Option<usize>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.u.is_empty() {
            return Err(Error::InvalidParameter("u must have at least one coordinate"));
        }
        if !math::all_finite(&self.u) {
            return Err(Error::NonFinite);
        }
        if math::norm(&self.u) > self.slab_cap + 1e-12 {
            return Err(Error::InvalidParameter("|u| must not exceed the slab cap"));
        }
        if let Some(n) = self.catalog_size {
            if n < self.items_per_round {
                return Err(Error::InvalidParameter("catalogue smaller than the items per round"));
            }
        }
        Ok(())
    }
}

/// Samples `k` unit-ball items and their success probabilities `sigmoid(u^T x)`.
pub fn sample_round_independent<R: Rng + ?Sized>(
    spec: &SyntheticSpec,
    profile: RewardProfile,
    rng: &mut R,
    t: u64,
) -> Result<Round> {
    let dim = spec.u.len();
    let k = spec.items_per_round;
    let mut features = Vec::with_capacity(k * dim);
    let mut probs = Vec::with_capacity(k);
    for _ in 0..k {
        let x = loop {
            let x = rng::unit_ball(rng, dim);
            if dot(&spec.u, &x).abs() <= spec.slab_cap {
                break x;
            }
        };
        probs.push(sigmoid(dot(&spec.u, &x)));
        features.extend(x);
    }
    let ids = ((t - 1) * k as u64..t * k as u64).collect();
    Ok(Round {
        t,
        actions: ActionSet::from_flat(dim, features, ids)?,
        profile,
        truth: Truth::Independent(probs),
    })
}

/// Independent Bernoulli draws.
pub fn sample_outcome_independent<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> OutcomeVector {
    OutcomeVector(probs.iter().map(|&p| rng.random::<f64>() < p).collect())
}

/// Conditional success probability `sigmoid(bar_c(x | prefix)^T u)` of
/// coverage row `item` after the rows in `prefix` failed.
pub fn dependent_cond_prob(coverage: &CoverageModel, u: &[f64], prefix: &[usize], item: usize) -> f64 {
    let mut acc = PrefixCoverage::new(coverage.d_prime());
    for &p in prefix {
        acc.push(coverage.coverage(p));
    }
    sigmoid(dot(&acc.feature(coverage.coverage(item)), u))
}

/// Probabilities of the `s + 1` event strings of a played sequence of
/// coverage rows: entry `k < s` is a first success at position `k`, entry
/// `s` is all failures.
pub fn event_string_probs(coverage: &CoverageModel, u: &[f64], played: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(played.len() + 1);
    let mut survival = 1.0;
    let mut prefix = PrefixCoverage::new(coverage.d_prime());
    for &row in played {
        let p = sigmoid(dot(&prefix.feature(coverage.coverage(row)), u));
        out.push(survival * p);
        survival *= 1.0 - p;
        prefix.push(coverage.coverage(row));
    }
    out.push(survival);
    out
}

/// Walks `played` (coverage rows) under the dependent model, stopping at the
/// first success.
pub fn sample_outcome_dependent<R: Rng + ?Sized>(
    coverage: &CoverageModel,
    u: &[f64],
    played: &[usize],
    rng: &mut R,
) -> Result<ProjectedFeedback> {
    if u.len() != coverage.d_prime() {
        return Err(Error::DimensionMismatch {
            expected: coverage.d_prime(),
            found: u.len(),
        });
    }
    let mut prefix = PrefixCoverage::new(coverage.d_prime());
    for (k, &row) in played.iter().enumerate() {
        if row >= coverage.len() {
            return Err(Error::IndexOutOfRange {
                index: row,
                len: coverage.len(),
            });
        }
        let p = sigmoid(dot(&prefix.feature(coverage.coverage(row)), u));
        if rng.random::<f64>() < p {
            return Ok(ProjectedFeedback::success_after(k));
        }
        prefix.push(coverage.coverage(row));
    }
    Ok(ProjectedFeedback::failures(played.len()))
}

/// Synthetic independent environment: a stream of rounds under one seed.
#[derive(Debug, Clone)]
pub struct IndependentEnv {
    spec: SyntheticSpec,
    scenario: Scenario,
    rng: StreamRng,
    catalog: Option<Vec<Vec<f64>>>,
    t: u64,
}

impl IndependentEnv {
    pub fn new(spec: SyntheticSpec, scenario: Scenario) -> Result<Self> {
        spec.validate()?;
        scenario.profile(spec.budget)?;
        let mut rng = rng::stream(spec.seed, purpose::ENVIRONMENT);
        let catalog = spec
            .catalog_size
            .map(|n| (0..n).map(|_| rng::unit_ball(&mut rng, spec.u.len())).collect());
        Ok(Self {
            spec,
            scenario,
            rng,
            catalog,
            t: 0,
        })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn next_round(&mut self) -> Option<Result<Round>> {
        if self.t >= self.spec.horizon {
            return None;
        }
        self.t += 1;
        let t = self.t;
        let profile = match self.scenario.profile(self.spec.budget) {
            Ok(p) => p,
            Err(e) => return Some(Err(e)),
        };
        Some(match &self.catalog {
            None => sample_round_independent(&self.spec, profile, &mut self.rng, t),
            Some(catalog) => {
                let picks = sample_distinct(&mut self.rng, catalog.len(), self.spec.items_per_round);
                let items: Vec<Vec<f64>> = picks.iter().map(|&i| catalog[i].clone()).collect();
                let probs = items.iter().map(|x| sigmoid(dot(&self.spec.u, x))).collect();
                ActionSet::new(items, picks.iter().map(|&i| i as u64).collect()).map(|actions| Round {
                    t,
                    actions,
                    profile,
                    truth: Truth::Independent(probs),
                })
            }
        })
    }
}

/// Synthetic dependent environment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DependentSpec {
    /// Planted topic weights; length is the topic count `d'`.
    pub u: Vec<f64>,
    pub catalog_size: usize,
    pub items_per_round: usize,
    pub budget: usize,
    pub horizon: u64,
    pub seed: u64,
    /// Each coverage entry is `U^sharpness` for uniform `U`; larger values
    /// give sparser items.
    pub topic_sharpness: f64,
}

/// Synthetic dependent environment over a fixed catalogue of items whose
/// coverage vectors have independent random entries in `(0, 1]`.
///
/// Action features are the coverage vectors scaled by `1 / sqrt(d')`.
#[derive(Debug, Clone)]
pub struct DependentEnv {
    spec: DependentSpec,
    scenario: Scenario,
    coverage: CoverageModel,
    rng: StreamRng,
    t: u64,
}

impl DependentEnv {
    pub fn new(spec: DependentSpec, scenario: Scenario) -> Result<Self> {
        let d_prime = spec.u.len();
        if d_prime == 0 {
            return Err(Error::InvalidParameter("u must have at least one topic"));
        }
        if spec.catalog_size < spec.items_per_round {
            return Err(Error::InvalidParameter("catalogue smaller than the items per round"));
        }
        if !(spec.topic_sharpness.is_finite() && spec.topic_sharpness > 0.0) {
            return Err(Error::InvalidParameter("topic sharpness must be positive"));
        }
        if !math::all_finite(&spec.u) {
            return Err(Error::NonFinite);
        }
        scenario.profile(spec.budget)?;
        let mut rng = rng::stream(spec.seed, purpose::ENVIRONMENT);
        let mut c = Vec::with_capacity(spec.catalog_size * d_prime);
        for _ in 0..spec.catalog_size {
            c.extend((0..d_prime).map(|_| libm::pow(1.0 - rng.random::<f64>(), spec.topic_sharpness).max(1e-12)));
        }
        let coverage = CoverageModel::from_flat(d_prime, c, (0..spec.catalog_size as u64).collect())?;
        Ok(Self {
            spec,
            scenario,
            coverage,
            rng,
            t: 0,
        })
    }

    pub fn coverage(&self) -> &CoverageModel {
        &self.coverage
    }

    pub fn u(&self) -> &[f64] {
        &self.spec.u
    }

    pub fn spec(&self) -> &DependentSpec {
        &self.spec
    }

    /// Coverage rows of a round's actions (ids are catalogue rows).
    pub fn rows(actions: &ActionSet) -> Vec<usize> {
        actions.ids().iter().map(|&id| id as usize).collect()
    }

    /// True conditional probability of action `item` after `prefix` failed.
    pub fn cond_prob(&self, actions: &ActionSet, prefix: &[usize], item: usize) -> f64 {
        let rows: Vec<usize> = prefix.iter().map(|&p| actions.id(p) as usize).collect();
        dependent_cond_prob(&self.coverage, &self.spec.u, &rows, actions.id(item) as usize)
    }

    /// Outcome walk for a played sequence of action indices.
    pub fn sample_feedback<R: Rng + ?Sized>(
        &self,
        actions: &ActionSet,
        played: &RetrySequence,
        rng: &mut R,
    ) -> Result<ProjectedFeedback> {
        let rows: Vec<usize> = played.iter().map(|&p| actions.id(p) as usize).collect();
        sample_outcome_dependent(&self.coverage, &self.spec.u, &rows, rng)
    }

    pub fn next_round(&mut self) -> Option<Result<Round>> {
        if self.t >= self.spec.horizon {
            return None;
        }
        self.t += 1;
        let picks = sample_distinct(&mut self.rng, self.spec.catalog_size, self.spec.items_per_round);
        let scale = 1.0 / math::sqrt(self.coverage.d_prime() as f64);
        let items: Vec<Vec<f64>> = picks
            .iter()
            .map(|&r| self.coverage.coverage(r).iter().map(|c| c * scale).collect())
            .collect();
        let ids = picks.iter().map(|&r| r as u64).collect();
        Some(ActionSet::new(items, ids).and_then(|actions| {
            Ok(Round {
                t: self.t,
                actions,
                profile: self.scenario.profile(self.spec.budget)?,
                truth: Truth::Dependent,
            })
        }))
    }
}

/// `count` distinct values from `0..n` in random order.
fn sample_distinct<R: Rng + ?Sized>(rng: &mut R, n: usize, count: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}

/// A dataset of items with fixed success probabilities, served in
/// consecutive non-overlapping chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkedDataset {
    dim: usize,
    ids: Vec<u64>,
    probs: Vec<f64>,
    features: Vec<f64>,
    chunk_size: usize,
}

impl ChunkedDataset {
    /// Rows are rescaled to unit norm when any norm exceeds `1 + 1e-6`.
    pub fn new(dim: usize, ids: Vec<u64>, probs: Vec<f64>, mut features: Vec<f64>, chunk_size: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be at least 1"));
        }
        if chunk_size == 0 {
            return Err(Error::InvalidParameter("chunk size must be at least 1"));
        }
        if probs.len() != ids.len() || features.len() != ids.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: ids.len() * dim,
                found: features.len(),
            });
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("success probabilities must lie in [0, 1]"));
        }
        if !math::all_finite(&features) {
            return Err(Error::NonFinite);
        }
        let mut seen = alloc::collections::BTreeSet::new();
        if let Some(&dup) = ids.iter().find(|&&id| !seen.insert(id)) {
            return Err(Error::DuplicateId(dup));
        }
        let renormalize = features.chunks_exact(dim).any(|x| math::norm(x) > 1.0 + 1e-6);
        for row in features.chunks_exact_mut(dim) {
            let n = math::norm(row);
            if n > 0.0 && (renormalize || n > 1.0) {
                row.iter_mut().for_each(|v| *v /= n);
            }
        }
        Ok(Self {
            dim,
            ids,
            probs,
            features,
            chunk_size,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    pub fn chunk_count(&self) -> usize {
        self.len().div_ceil(self.chunk_size)
    }

    /// Chunk `cursor` (0-based) as a round, or `None` past the end.
    pub fn chunk(&self, cursor: usize, scenario: &Scenario, budget: usize) -> Option<Result<Round>> {
        if cursor >= self.chunk_count() {
            return None;
        }
        let start = cursor * self.chunk_size;
        let end = (start + self.chunk_size).min(self.len());
        let actions = ActionSet::from_flat(
            self.dim,
            self.features[start * self.dim..end * self.dim].to_vec(),
            self.ids[start..end].to_vec(),
        );
        Some(actions.and_then(|actions| {
            Ok(Round {
                t: cursor as u64 + 1,
                actions,
                profile: scenario.profile(budget)?,
                truth: Truth::Independent(self.probs[start..end].to_vec()),
            })
        }))
    }
}
