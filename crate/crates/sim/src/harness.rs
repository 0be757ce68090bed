//! Experiment runner: drives one environment and a set of policies through
//! `T` rounds, logs per-round rows and summarizes the run.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cascade_core::baselines::{random_policy, CascadeUcb1, EpsGreedy, GlmMle};
use cascade_core::coverage::{build_coverage_with_ids, CoverageModel};
use cascade_core::env::{
    ChunkedDataset, DependentEnv, DependentSpec, IndependentEnv, Round, Scenario, SyntheticSpec, Truth,
};
use cascade_core::oracle::{
    bayes_sequence_independent, brute_force_bayes, greedy_sequence, BRUTE_FORCE_MAX_ITEMS, BRUTE_FORCE_MAX_LEN,
};
use cascade_core::policy::{DepPolicy, Exploration, IndPolicy, PolicyConfig};
use cascade_core::reward::expected_reward;
use cascade_core::rng::{self, purpose, StreamRng};
use cascade_core::{metrics, project_feedback, ActionSet, ProjectedFeedback, RetrySequence, RewardProfile};
use rand::Rng;
use serde::Serialize;

use crate::config::{AlphaSetting, EnvironmentConfig, ExperimentConfig, PolicyEntry, PolicyKind};
use crate::dataset::load_dataset;

pub const CSV_HEADER: [&str; 8] = [
    "policy",
    "t",
    "s_chosen",
    "s_observed",
    "reward",
    "cum_reward",
    "bayes_value",
    "regret_cum",
];

const DEFAULT_DEPENDENT_U_NORM: f64 = 3.0;

/// One logged round of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub policy: String,
    pub t: u64,
    pub s_chosen: usize,
    pub s_observed: usize,
    pub reward: f64,
    pub cum_reward: f64,
    pub bayes_value: Option<f64>,
    pub regret_cum: Option<f64>,
    /// Ids of the played items, in order; not part of the CSV.
    pub played: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySummary {
    pub policy: String,
    pub kind: &'static str,
    pub final_cr: Option<f64>,
    pub cr_per_round: Option<f64>,
    pub ncr: Option<f64>,
    pub cum_regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub rounds: u64,
    /// Sum of first-position rewards: the best attainable cumulative reward.
    pub cr_max: Option<f64>,
    pub policies: Vec<PolicySummary>,
    pub config: serde_json::Value,
}

impl Summary {
    pub fn policy(&self, label: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == label)
    }
}

/// Rows ordered by policy (configuration order) then round.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<RunRow>,
    pub summary: Summary,
}

impl RunOutput {
    pub fn rows_for<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a RunRow> + 'a {
        self.rows.iter().filter(move |r| r.policy == label)
    }
}

enum World {
    Independent(IndependentEnv),
    Dependent(DependentEnv),
    Dataset {
        data: ChunkedDataset,
        cursor: usize,
        scenario: Scenario,
        budget: usize,
    },
}

impl World {
    fn next_round(&mut self) -> Option<cascade_core::Result<Round>> {
        match self {
            Self::Independent(env) => env.next_round(),
            Self::Dependent(env) => env.next_round(),
            Self::Dataset {
                data,
                cursor,
                scenario,
                budget,
            } => {
                let round = data.chunk(*cursor, scenario, *budget);
                *cursor += 1;
                round
            }
        }
    }

    fn model_dim(&self) -> usize {
        match self {
            Self::Independent(env) => env.spec().u.len(),
            Self::Dependent(env) => env.coverage().d_prime(),
            Self::Dataset { data, .. } => data.dim(),
        }
    }

    /// Success probabilities along `seq`, each conditioned on the failure of
    /// the positions before it.
    fn sequence_probs(&self, round: &Round, seq: &[usize]) -> Vec<f64> {
        match (&round.truth, self) {
            (Truth::Independent(p), _) => seq.iter().map(|&i| p[i]).collect(),
            (Truth::Dependent, Self::Dependent(env)) => (0..seq.len())
                .map(|j| env.cond_prob(&round.actions, &seq[..j], seq[j]))
                .collect(),
            (Truth::Dependent, _) => unreachable!("dependent truth comes from the dependent environment"),
        }
    }

    /// Expected reward of the benchmark sequence: exact in the independent
    /// model and for small dependent rounds, greedy under the true
    /// conditional probabilities otherwise.
    fn bayes_value(&self, round: &Round) -> Result<f64> {
        match (&round.truth, self) {
            (Truth::Independent(p), _) => Ok(bayes_sequence_independent(p, &round.profile).1),
            (Truth::Dependent, Self::Dependent(env)) => {
                let k = round.actions.len();
                let cond = |prefix: &[usize], item: usize| env.cond_prob(&round.actions, prefix, item);
                if k <= BRUTE_FORCE_MAX_ITEMS && round.profile.budget().min(k) <= BRUTE_FORCE_MAX_LEN {
                    Ok(brute_force_bayes(cond, k, &round.profile)?.1)
                } else {
                    Ok(greedy_sequence(cond, k, &round.profile).1)
                }
            }
            (Truth::Dependent, _) => unreachable!("dependent truth comes from the dependent environment"),
        }
    }
}

enum Agent {
    Ind(IndPolicy),
    Dep(DepPolicy),
    Random,
    Eps(EpsGreedy),
    Cascade(CascadeUcb1),
    Glm(GlmMle),
}

struct Slot {
    label: String,
    kind: PolicyKind,
    agent: Agent,
    rng: StreamRng,
    walk: StreamRng,
    rows: Vec<RunRow>,
    cum_reward: f64,
    cum_regret: f64,
}

impl Slot {
    fn select(&mut self, round: &Round) -> Result<RetrySequence> {
        let (actions, profile) = (&round.actions, &round.profile);
        Ok(match &mut self.agent {
            Agent::Ind(p) => p.select(actions, profile)?.sequence,
            Agent::Dep(p) => p.select(actions, profile)?.sequence,
            Agent::Random => random_policy(actions.len(), profile, &mut self.rng),
            Agent::Eps(p) => p.select(actions, profile, &mut self.rng)?.sequence,
            Agent::Cascade(p) => p.select(actions, profile, round.t),
            Agent::Glm(p) => p.select(actions, profile)?,
        })
    }

    fn update(&mut self, played: &RetrySequence, actions: &ActionSet, fb: &ProjectedFeedback) -> Result<()> {
        match &mut self.agent {
            Agent::Ind(p) => p.update(played, actions, fb)?,
            Agent::Dep(p) => p.update(played, actions, fb)?,
            Agent::Random => {}
            Agent::Eps(p) => p.update(played, actions, fb)?,
            Agent::Cascade(p) => p.update(played, actions, fb)?,
            Agent::Glm(p) => p.update(played, actions, fb)?,
        }
        Ok(())
    }
}

/// Reward collected for feedback `fb` on a sequence of length `len`.
pub fn feedback_reward(fb: &ProjectedFeedback, len: usize, profile: &RewardProfile) -> f64 {
    if fb.terminated_by_success() {
        profile.reward(fb.len())
    } else {
        profile.loss(len)
    }
}

fn scaled(v: Vec<f64>, norm: f64) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return v;
    }
    v.into_iter().map(|x| x * norm / n).collect()
}

fn build_world(cfg: &ExperimentConfig) -> Result<(World, f64)> {
    let scenario = cfg.scenario.to_scenario();
    let mut params = rng::stream(cfg.seed, purpose::PARAMETERS);
    Ok(match &cfg.environment {
        EnvironmentConfig::Independent {
            dim,
            items_per_round,
            slab_cap,
            u,
            u_norm,
            catalog_size,
        } => {
            let u = match u {
                Some(u) => u.clone(),
                None => scaled(
                    (0..*dim).map(|_| rng::standard_normal(&mut params)).collect(),
                    u_norm.unwrap_or(*slab_cap),
                ),
            };
            let spec = SyntheticSpec {
                u,
                items_per_round: *items_per_round,
                budget: cfg.budget,
                horizon: cfg.horizon,
                seed: cfg.seed,
                slab_cap: *slab_cap,
                catalog_size: *catalog_size,
            };
            (World::Independent(IndependentEnv::new(spec, scenario)?), *slab_cap)
        }
        EnvironmentConfig::Dependent {
            topics,
            items_per_round,
            catalog_size,
            topic_sharpness,
            u,
            u_norm,
        } => {
            let u = match u {
                Some(u) => u.clone(),
                None => scaled(
                    (0..*topics).map(|_| params.random_range(0.5..1.5)).collect(),
                    u_norm.unwrap_or(DEFAULT_DEPENDENT_U_NORM),
                ),
            };
            let cap = u.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-6);
            let spec = DependentSpec {
                u,
                catalog_size: *catalog_size,
                items_per_round: *items_per_round,
                budget: cfg.budget,
                horizon: cfg.horizon,
                seed: cfg.seed,
                topic_sharpness: *topic_sharpness,
            };
            (World::Dependent(DependentEnv::new(spec, scenario)?), cap)
        }
        EnvironmentConfig::Dataset { path, chunk_size, .. } => {
            let data = load_dataset(path, *chunk_size)?;
            (
                World::Dataset {
                    data,
                    cursor: 0,
                    scenario,
                    budget: cfg.budget,
                },
                1.0,
            )
        }
    })
}

fn policy_config(entry: &PolicyEntry, cfg: &ExperimentConfig, default_cap: f64) -> PolicyConfig {
    let exploration = match &entry.alpha {
        Some(AlphaSetting::Value(a)) => Exploration::Fixed(*a),
        Some(AlphaSetting::Named(_)) => Exploration::Theoretical {
            horizon: cfg.horizon.max(1),
        },
        None => PolicyConfig::default().exploration,
    };
    PolicyConfig {
        slab_cap: entry.slab_cap.unwrap_or(default_cap),
        exploration,
        learning_rate: entry.learning_rate.unwrap_or(1.0),
        max_budget: cfg.budget.max(1),
        delta: entry.delta.unwrap_or(PolicyConfig::default().delta),
    }
}

fn build_slots(cfg: &ExperimentConfig, world: &World, default_cap: f64) -> Result<Vec<Slot>> {
    let dim = world.model_dim();
    let mut coverage: Option<CoverageModel> = None;
    let mut slots = Vec::with_capacity(cfg.policies.len());
    for (i, entry) in cfg.policies.iter().enumerate() {
        let label = entry.label().to_string();
        let pcfg = policy_config(entry, cfg, default_cap);
        let agent = match entry.kind {
            PolicyKind::Ind => Agent::Ind(IndPolicy::new(dim, pcfg)?),
            PolicyKind::Dep => {
                if coverage.is_none() {
                    coverage = Some(match (world, &cfg.environment) {
                        (World::Dependent(env), _) => env.coverage().clone(),
                        (World::Dataset { data, .. }, EnvironmentConfig::Dataset { topics, gmm_seed, .. }) => {
                            build_coverage_with_ids(
                                data.features(),
                                data.dim(),
                                data.ids().to_vec(),
                                *topics,
                                gmm_seed.unwrap_or(cfg.seed),
                            )
                            .context("fitting the topic coverage model")?
                        }
                        _ => bail!("the dep policy needs a dependent or dataset environment"),
                    });
                }
                Agent::Dep(DepPolicy::new(coverage.clone().expect("set above"), pcfg)?)
            }
            PolicyKind::Random => Agent::Random,
            PolicyKind::EpsGreedy => {
                let inner = IndPolicy::new(dim, pcfg)?;
                Agent::Eps(EpsGreedy::new(inner, entry.eps.unwrap_or(0.1))?)
            }
            PolicyKind::CascadeUcb1 => Agent::Cascade(CascadeUcb1::new()),
            PolicyKind::GlmMle => Agent::Glm(GlmMle::new(
                dim,
                entry.lambda.unwrap_or(1.0),
                entry.alpha_explore.unwrap_or(0.1),
            )?),
        };
        slots.push(Slot {
            label,
            kind: entry.kind,
            agent,
            rng: rng::stream(cfg.seed, purpose::POLICY_BASE + i as u64),
            walk: rng::stream(cfg.seed, purpose::WALK_BASE + i as u64),
            rows: Vec::new(),
            cum_reward: 0.0,
            cum_regret: 0.0,
        });
    }
    Ok(slots)
}

/// Runs one experiment in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (mut world, default_cap) = build_world(cfg)?;
    let mut slots = build_slots(cfg, &world, default_cap)?;
    let mut outcome_rng = rng::stream(cfg.seed, purpose::OUTCOMES);
    let mut rounds = 0u64;
    let mut cr_max = 0.0;
    while rounds < cfg.horizon {
        let Some(round) = world.next_round() else { break };
        let t = rounds + 1;
        let round = round.with_context(|| format!("round {t}: environment"))?;
        rounds = t;
        cr_max += round.profile.rewards().first().copied().unwrap_or(f64::NAN);
        let outcome = match &round.truth {
            Truth::Independent(p) => Some(cascade_core::env::sample_outcome_independent(p, &mut outcome_rng)),
            Truth::Dependent => None,
        };
        let bayes = if cfg.metrics.regret {
            Some(
                world
                    .bayes_value(&round)
                    .with_context(|| format!("round {t}: benchmark"))?,
            )
        } else {
            None
        };
        for slot in &mut slots {
            let label = slot.label.clone();
            let ctx = || format!("round {t}: policy {label}");
            let seq = slot.select(&round).with_context(ctx)?;
            seq.check_round(round.actions.len(), &round.profile).with_context(ctx)?;
            let fb = match (&outcome, &world) {
                (Some(y), _) => project_feedback(y, &seq).with_context(ctx)?,
                (None, World::Dependent(env)) => env
                    .sample_feedback(&round.actions, &seq, &mut slot.walk)
                    .with_context(ctx)?,
                (None, _) => unreachable!("only the dependent environment lacks marginal probabilities"),
            };
            let reward = feedback_reward(&fb, seq.len(), &round.profile);
            slot.cum_reward += reward;
            let regret_cum = bayes.map(|b| {
                let value = expected_reward(&world.sequence_probs(&round, &seq), &round.profile);
                slot.cum_regret += b - value;
                slot.cum_regret
            });
            slot.update(&seq, &round.actions, &fb).with_context(ctx)?;
            slot.rows.push(RunRow {
                policy: slot.label.clone(),
                t,
                s_chosen: seq.len(),
                s_observed: fb.len(),
                reward,
                cum_reward: slot.cum_reward,
                bayes_value: bayes,
                regret_cum,
                played: seq.iter().map(|&i| round.actions.id(i)).collect(),
            });
        }
    }
    let cr_max = (rounds > 0 && cr_max.is_finite()).then_some(cr_max);
    let cr_random = slots
        .iter()
        .find(|s| s.kind == PolicyKind::Random)
        .and_then(|s| s.rows.last().map(|r| r.cum_reward));
    let policies = slots
        .iter()
        .map(|s| {
            let last = s.rows.last();
            let final_cr = last.map(|r| r.cum_reward);
            PolicySummary {
                policy: s.label.clone(),
                kind: s.kind.as_str(),
                final_cr,
                cr_per_round: final_cr.map(|cr| cr / rounds as f64),
                ncr: match (final_cr, cr_random, cr_max) {
                    (Some(cr), Some(rand), Some(max)) => metrics::ncr(cr, rand, max),
                    _ => None,
                },
                cum_regret: last.and_then(|r| r.regret_cum),
            }
        })
        .collect();
    let summary = Summary {
        seed: cfg.seed,
        rounds,
        cr_max,
        policies,
        config: cfg.echo(),
    };
    let rows = slots.into_iter().flat_map(|s| s.rows).collect();
    Ok(RunOutput { rows, summary })
}

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[RunRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.t.to_string(),
            r.s_chosen.to_string(),
            r.s_observed.to_string(),
            r.reward.to_string(),
            r.cum_reward.to_string(),
            field(r.bayes_value),
            field(r.regret_cum),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar path of the summary for a CSV destination.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

/// Runs an experiment and writes the CSV and its summary sidecar.
pub fn run_to_files(cfg: &ExperimentConfig) -> Result<Summary> {
    let Some(out) = &cfg.output else {
        bail!("no output path configured (set `output` or pass --out)")
    };
    let run = run_experiment(cfg)?;
    let file = std::fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_csv(&run.rows, std::io::BufWriter::new(file))?;
    let sidecar = summary_path(out);
    std::fs::write(&sidecar, serde_json::to_string_pretty(&run.summary)? + "\n")
        .with_context(|| format!("writing {}", sidecar.display()))?;
    Ok(run.summary)
}

/// Runs independent experiments on worker threads; results keep input order.
pub fn run_many(configs: &[ExperimentConfig]) -> Vec<Result<RunOutput>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).max(1);
    let mut results: Vec<Option<Result<RunOutput>>> = configs.iter().map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = configs.len().div_ceil(workers).max(1);
        for (cfgs, out) in configs.chunks(chunk).zip(results.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (cfg, slot) in cfgs.iter().zip(out) {
                    *slot = Some(run_experiment(cfg));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every config ran")).collect()
}
