//! TOML run configuration.
//!
//! ```toml
//! dataset = "data/dataset.json"
//! output_dir = "runs/demo"
//! seed = 7
//! parallelism = 4
//! mode = "strict"          # or "lenient"
//! timing = "simulated"     # or "wall"
//!
//! [debate]
//! max_rounds = 5
//! concurrent_followers = true
//!
//! [[agents]]
//! model = "Llama3-8B-instruct"
//! backend = { kind = "http", endpoint = "http://localhost:8000/v1" }
//!
//! [[agents]]
//! model = "Gemma2-9B-it"
//! backend = { kind = "scripted", script = "scripts/gemma.json" }
//!
//! [[agents]]
//! model = "Mistral-7B-instruct"
//! backend = { kind = "stochastic" }
//!
//! [stochastic]
//! agree_prob_given_question = 0.7
//! agree_prob_given_clear = 0.3
//! ```
//!
//! Agent order is the roster order. Relative paths resolve against the
//! directory holding the config file. HTTP backends without an endpoint or key
//! fall back to `LLM_ENDPOINT` and `LLM_API_KEY`.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, DEFAULT_MAX_TOKENS, DEFAULT_SENTENCE_LIMIT, DEFAULT_TEMPERATURE};
use crate::backend::{
    Backend, BackendKind, HttpBackend, Script, ScriptedBackend, StochasticBackend, StochasticPolicy,
    DEFAULT_HTTP_TIMEOUT_S,
};
use crate::engine::{Agent, AgentPool, DebateConfig, RetryBudget, TimingMode, DEFAULT_MAX_ROUNDS, FOLLOWER_COUNT};
use crate::eval::JudgeMode;

pub const ENDPOINT_ENV: &str = "LLM_ENDPOINT";
pub const API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    Http {
        #[serde(default)]
        endpoint: Option<String>,
        #[serde(default)]
        api_key: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
    },
    Scripted {
        script: PathBuf,
    },
    Stochastic,
}

fn default_timeout() -> f64 {
    DEFAULT_HTTP_TIMEOUT_S
}

impl BackendSpec {
    pub fn kind(&self) -> BackendKind {
        match self {
            BackendSpec::Http { .. } => BackendKind::Http,
            BackendSpec::Scripted { .. } => BackendKind::Scripted,
            BackendSpec::Stochastic => BackendKind::Stochastic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_sentence_limit")]
    pub reasoning_sentence_limit: u32,
    pub backend: BackendSpec,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

fn default_sentence_limit() -> u32 {
    DEFAULT_SENTENCE_LIMIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebateSection {
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
    #[serde(default = "yes")]
    pub concurrent_followers: bool,
    #[serde(default)]
    pub retry: RetryBudget,
}

fn default_max_rounds() -> u32 {
    DEFAULT_MAX_ROUNDS
}

fn yes() -> bool {
    true
}

impl Default for DebateSection {
    fn default() -> Self {
        Self {
            max_rounds: DEFAULT_MAX_ROUNDS,
            concurrent_followers: true,
            retry: RetryBudget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub mode: JudgeMode,
    #[serde(default)]
    pub timing: TimingMode,
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    #[serde(default)]
    pub term_table: Option<PathBuf>,
    #[serde(default)]
    pub debate: DebateSection,
    pub agents: Vec<AgentSpec>,
    /// Policy shared by every stochastic backend. Its seed is taken from
    /// the top-level `seed`.
    #[serde(default)]
    pub stochastic: Option<StochasticPolicy>,
}

fn default_parallelism() -> usize {
    1
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: format!("{}: {}", e.path(), e.inner().message()),
        })
    }

    /// Reads, validates, and resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.dataset = resolve(base, &self.dataset);
        self.output_dir = resolve(base, &self.output_dir);
        if let Some(d) = &self.templates_dir {
            self.templates_dir = Some(resolve(base, d));
        }
        if let Some(t) = &self.term_table {
            self.term_table = Some(resolve(base, t));
        }
        for agent in &mut self.agents {
            if let BackendSpec::Scripted { script } = &mut agent.backend {
                *script = resolve(base, script);
            }
        }
    }

    pub fn roster(&self) -> Vec<String> {
        self.agents.iter().map(|a| a.model.clone()).collect()
    }

    pub fn uses_stochastic(&self) -> bool {
        self.agents.iter().any(|a| a.backend.kind() == BackendKind::Stochastic)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.agents.len() != FOLLOWER_COUNT + 1 {
            return Err(ConfigError::Invalid(format!(
                "exactly 3 agents are required, got {}",
                self.agents.len()
            )));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if self.agents[..i].iter().any(|b| b.model == a.model) {
                return Err(ConfigError::Invalid(format!("model {} is configured twice", a.model)));
            }
            self.agent_config(a)
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if let BackendSpec::Http { timeout_s, .. } = a.backend {
                if !(timeout_s.is_finite() && timeout_s > 0.0) {
                    return Err(ConfigError::Invalid(format!("{}: timeout_s must be positive", a.model)));
                }
            }
        }
        if self.parallelism == 0 {
            return Err(ConfigError::Invalid("parallelism must be at least 1".into()));
        }
        if self.uses_stochastic() {
            if self.seed.is_none() {
                return Err(ConfigError::Invalid(
                    "seed is required when a stochastic backend is configured".into(),
                ));
            }
            if self.stochastic.is_none() {
                return Err(ConfigError::Invalid(
                    "a [stochastic] section is required when a stochastic backend is configured".into(),
                ));
            }
        }
        self.debate_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    fn agent_config(&self, a: &AgentSpec) -> AgentConfig {
        AgentConfig {
            model_name: a.model.clone(),
            temperature: a.temperature,
            max_tokens: a.max_tokens,
            reasoning_sentence_limit: a.reasoning_sentence_limit,
        }
    }

    pub fn debate_config(&self) -> DebateConfig {
        let mut c = DebateConfig::new(self.roster());
        c.max_rounds = self.debate.max_rounds;
        c.concurrent_followers = self.debate.concurrent_followers;
        c.retry = self.debate.retry;
        c.timing = self.timing;
        c
    }

    /// Instantiates one backend per agent. `env` looks up fallback values for
    /// HTTP endpoints and keys.
    pub fn build_agents(&self, env: impl Fn(&str) -> Option<String>) -> Result<AgentPool, ConfigError> {
        let policy = match (&self.stochastic, self.seed) {
            (Some(p), Some(seed)) => Some(Arc::new(StochasticPolicy {
                rng_seed: seed,
                ..p.clone()
            })),
            _ => None,
        };
        let mut pool = AgentPool::new();
        for a in &self.agents {
            let backend: Arc<dyn Backend> = match &a.backend {
                BackendSpec::Http {
                    endpoint,
                    api_key,
                    timeout_s,
                } => {
                    let endpoint = endpoint.clone().or_else(|| env(ENDPOINT_ENV)).ok_or_else(|| {
                        ConfigError::Invalid(format!("{}: no endpoint configured and {ENDPOINT_ENV} unset", a.model))
                    })?;
                    let key = api_key.clone().or_else(|| env(API_KEY_ENV));
                    Arc::new(HttpBackend::new(endpoint, key, Duration::from_secs_f64(*timeout_s)))
                }
                BackendSpec::Scripted { script } => {
                    let script = Script::load(script).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                    Arc::new(ScriptedBackend::new(script))
                }
                BackendSpec::Stochastic => {
                    let policy = policy.clone().ok_or_else(|| {
                        ConfigError::Invalid("stochastic backend needs a seed and a [stochastic] section".into())
                    })?;
                    Arc::new(StochasticBackend::new(&a.model, policy).map_err(|e| ConfigError::Invalid(e.to_string()))?)
                }
            };
            pool.insert(Agent::new(self.agent_config(a), backend));
        }
        Ok(pool)
    }
}
