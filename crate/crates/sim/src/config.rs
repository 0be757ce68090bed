//! Experiment configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use cascade_core::env::Scenario;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Number of rounds `T`.
    pub horizon: u64,
    /// Per-round budget `b`.
    pub budget: usize,
    /// CSV destination; the summary goes next to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub environment: EnvironmentConfig,
    #[serde(rename = "policy")]
    pub policies: Vec<PolicyEntry>,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    Vanilla,
    Exponential,
    Custom { rewards: Vec<f64>, losses: Vec<f64> },
}

impl ScenarioConfig {
    pub fn to_scenario(&self) -> Scenario {
        match self {
            Self::Vanilla => Scenario::Vanilla,
            Self::Exponential => Scenario::Exponential,
            Self::Custom { rewards, losses } => Scenario::Custom {
                rewards: rewards.clone(),
                losses: losses.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    /// Fresh unit-ball items each round, success probability `sigmoid(u^T x)`.
    Independent {
        dim: usize,
        items_per_round: usize,
        #[serde(default = "default_cap")]
        slab_cap: f64,
        /// Drawn with norm `u_norm` (default `slab_cap`) when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u_norm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        catalog_size: Option<usize>,
    },
    /// Catalogue of items with random topic coverage; conditional success
    /// probability `sigmoid(bar_c^T u)`.
    Dependent {
        topics: usize,
        items_per_round: usize,
        catalog_size: usize,
        #[serde(default = "default_sharpness")]
        topic_sharpness: f64,
        /// Drawn with positive entries and norm `u_norm` (default 3) when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u_norm: Option<f64>,
    },
    /// Items and success probabilities from a CSV file, served in chunks.
    Dataset {
        path: PathBuf,
        #[serde(default = "default_chunk")]
        chunk_size: usize,
        /// Topic count of the coverage model used by the dependent policy.
        #[serde(default = "default_topics")]
        topics: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gmm_seed: Option<u64>,
    },
}

fn default_cap() -> f64 {
    1.0
}

fn default_sharpness() -> f64 {
    2.0
}

fn default_chunk() -> usize {
    100
}

fn default_topics() -> usize {
    8
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Ind,
    Dep,
    Random,
    EpsGreedy,
    CascadeUcb1,
    GlmMle,
}

impl PolicyKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ind" => Self::Ind,
            "dep" => Self::Dep,
            "random" => Self::Random,
            "eps_greedy" => Self::EpsGreedy,
            "cascade_ucb1" => Self::CascadeUcb1,
            "glm_mle" => Self::GlmMle,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ind => "ind",
            Self::Dep => "dep",
            Self::Random => "random",
            Self::EpsGreedy => "eps_greedy",
            Self::CascadeUcb1 => "cascade_ucb1",
            Self::GlmMle => "glm_mle",
        }
    }
}

/// Exploration scale: a number or `"theoretical"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSetting {
    Value(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub kind: PolicyKind,
    /// Label in the CSV; defaults to the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaSetting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slab_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_explore: Option<f64>,
}

impl PolicyEntry {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            name: None,
            alpha: None,
            learning_rate: None,
            slab_cap: None,
            delta: None,
            eps: None,
            lambda: None,
            alpha_explore: None,
        }
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.as_str())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let label = self.label();
        if label.is_empty() || label.contains([',', '"', '\n']) {
            return invalid(format!("policy name {label:?} is not a plain label"));
        }
        let given = [
            ("alpha", self.alpha.is_some()),
            ("learning_rate", self.learning_rate.is_some()),
            ("slab_cap", self.slab_cap.is_some()),
            ("delta", self.delta.is_some()),
            ("eps", self.eps.is_some()),
            ("lambda", self.lambda.is_some()),
            ("alpha_explore", self.alpha_explore.is_some()),
        ];
        let allowed: &[&str] = match self.kind {
            PolicyKind::Ind | PolicyKind::Dep => &["alpha", "learning_rate", "slab_cap", "delta"],
            PolicyKind::EpsGreedy => &["eps", "learning_rate", "slab_cap"],
            PolicyKind::GlmMle => &["lambda", "alpha_explore"],
            PolicyKind::Random | PolicyKind::CascadeUcb1 => &[],
        };
        for (key, present) in given {
            if present && !allowed.contains(&key) {
                return invalid(format!(
                    "policy {label}: `{key}` does not apply to {}",
                    self.kind.as_str()
                ));
            }
        }
        if let Some(AlphaSetting::Named(n)) = &self.alpha {
            if n != "theoretical" {
                return invalid(format!(
                    "policy {label}: alpha must be a number or \"theoretical\", got {n:?}"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Log the Bayes value and cumulative regret when the truth is known.
    #[serde(default = "default_true")]
    pub regret: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { regret: true }
    }
}

/// Command-line overrides; `None` keeps the file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    /// Comma-separated policy names or kinds.
    pub policy: Option<String>,
    pub horizon: Option<u64>,
    pub scenario: Option<String>,
    pub budget: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.output {
            self.output = Some(out.clone());
        }
        if let Some(t) = o.horizon {
            self.horizon = t;
        }
        if let Some(b) = o.budget {
            self.budget = b;
        }
        if let Some(s) = &o.scenario {
            self.scenario = match s.as_str() {
                "vanilla" => ScenarioConfig::Vanilla,
                "exponential" => ScenarioConfig::Exponential,
                other => return invalid(format!("unknown scenario {other:?} (expected vanilla or exponential)")),
            };
        }
        if let Some(list) = &o.policy {
            let mut chosen = Vec::new();
            for wanted in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let configured: Vec<PolicyEntry> = self
                    .policies
                    .iter()
                    .filter(|p| p.label() == wanted || (p.name.is_none() && p.kind.as_str() == wanted))
                    .cloned()
                    .collect();
                if !configured.is_empty() {
                    chosen.extend(configured);
                } else if let Some(kind) = PolicyKind::parse(wanted) {
                    chosen.push(PolicyEntry::new(kind));
                } else {
                    return invalid(format!("unknown policy {wanted:?}"));
                }
            }
            self.policies = chosen;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.policies.is_empty() {
            return invalid("at least one [[policy]] is required");
        }
        let mut labels: Vec<&str> = self.policies.iter().map(PolicyEntry::label).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate policy label {:?}; set distinct `name`s", w[0]));
        }
        for p in &self.policies {
            p.validate()?;
        }
        if let Err(e) = self.scenario.to_scenario().profile(self.budget) {
            return invalid(format!("scenario: {e}"));
        }
        match &self.environment {
            EnvironmentConfig::Independent {
                dim,
                items_per_round,
                slab_cap,
                u,
                u_norm,
                catalog_size,
            } => {
                if *dim == 0 || *items_per_round == 0 {
                    return invalid("environment: dim and items_per_round must be positive");
                }
                if !(slab_cap.is_finite() && *slab_cap > 0.0) {
                    return invalid("environment: slab_cap must be positive");
                }
                if let Some(u) = u {
                    if u.len() != *dim {
                        return invalid(format!("environment: u has {} entries, dim is {dim}", u.len()));
                    }
                }
                if u_norm.is_some_and(|n| !(n >= 0.0 && n <= *slab_cap)) {
                    return invalid("environment: u_norm must lie in [0, slab_cap]");
                }
                if catalog_size.is_some_and(|n| n < *items_per_round) {
                    return invalid("environment: catalog_size below items_per_round");
                }
                if self.policies.iter().any(|p| p.kind == PolicyKind::Dep) {
                    return invalid("the dep policy needs a dependent or dataset environment");
                }
            }
            EnvironmentConfig::Dependent {
                topics,
                items_per_round,
                catalog_size,
                topic_sharpness,
                u,
                u_norm,
            } => {
                if *topics == 0 || *items_per_round == 0 {
                    return invalid("environment: topics and items_per_round must be positive");
                }
                if catalog_size < items_per_round {
                    return invalid("environment: catalog_size below items_per_round");
                }
                if !(topic_sharpness.is_finite() && *topic_sharpness > 0.0) {
                    return invalid("environment: topic_sharpness must be positive");
                }
                if let Some(u) = u {
                    if u.len() != *topics {
                        return invalid(format!("environment: u has {} entries, topics is {topics}", u.len()));
                    }
                }
                if u_norm.is_some_and(|n| !(n.is_finite() && n >= 0.0)) {
                    return invalid("environment: u_norm must be non-negative");
                }
            }
            EnvironmentConfig::Dataset { chunk_size, topics, .. } => {
                if *chunk_size == 0 || *topics == 0 {
                    return invalid("environment: chunk_size and topics must be positive");
                }
            }
        }
        Ok(())
    }

    /// The configuration without its seed, as echoed in the summary.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("seed");
        }
        v
    }
}
