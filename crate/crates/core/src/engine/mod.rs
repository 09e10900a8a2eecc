//! Single-agent baselines and the leader–follower debate protocol.
//!
//! A debate runs for at most `max_rounds` rounds. In each round the leader
//! proposes (round 1 from scratch, later rounds from the previous round's
//! feedback), both followers evaluate that proposal blind to one another, and
//! the debate ends with consensus as soon as both followers agree. Reaching
//! the round cap without consensus, or an agent failing after its retry
//! budget, ends the debate with a non-consensus or error outcome.

mod debate;
mod experiment;

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, FollowerFeedback, ParseError, PromptBundle, Proposal, Role, Stance};
use crate::backend::{Backend, BackendError};

pub use debate::Engine;
pub use experiment::{JsonlSink, MemorySink, RecordSink, RunSummary, BASELINES_FILE, TRANSCRIPTS_FILE};

pub const DEFAULT_MAX_ROUNDS: u32 = 5;
pub const FOLLOWER_COUNT: usize = 2;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid debate config: {0}")]
    InvalidConfig(String),
    #[error("no agent configured for model {0}")]
    UnknownModel(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("writing results: {0}")]
    Sink(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryBudget {
    /// Extra attempts after a retryable transport failure.
    pub transport: u32,
    /// Regenerations after an unparseable response.
    pub parse: u32,
    /// Base delay for exponential backoff between transport retries.
    pub backoff_ms: u64,
}

impl Default for RetryBudget {
    fn default() -> Self {
        Self {
            transport: 2,
            parse: 1,
            backoff_ms: 250,
        }
    }
}

/// How call latencies and debate wall time are measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    /// Real elapsed time.
    #[default]
    Wall,
    /// Latencies reported by the backends; debate time is derived from them.
    /// Makes simulated runs reproducible byte for byte.
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateConfig {
    pub max_rounds: u32,
    pub follower_count: usize,
    pub roster: Vec<String>,
    pub retry: RetryBudget,
    /// Issue the two follower calls of a round concurrently.
    pub concurrent_followers: bool,
    pub timing: TimingMode,
}

impl DebateConfig {
    pub fn new(roster: Vec<String>) -> Self {
        Self {
            max_rounds: DEFAULT_MAX_ROUNDS,
            follower_count: FOLLOWER_COUNT,
            roster,
            retry: RetryBudget::default(),
            concurrent_followers: true,
            timing: TimingMode::Wall,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.follower_count != FOLLOWER_COUNT {
            return Err(EngineError::InvalidConfig(format!(
                "follower_count must be {FOLLOWER_COUNT}, got {}",
                self.follower_count
            )));
        }
        if self.roster.len() != FOLLOWER_COUNT + 1 {
            return Err(EngineError::InvalidConfig(format!(
                "roster needs exactly 3 models, got {}",
                self.roster.len()
            )));
        }
        let distinct: HashSet<&String> = self.roster.iter().collect();
        if distinct.len() != self.roster.len() {
            return Err(EngineError::InvalidConfig("roster models must be distinct".into()));
        }
        if self.max_rounds == 0 {
            return Err(EngineError::InvalidConfig("max_rounds must be at least 1".into()));
        }
        Ok(())
    }

    /// The two non-leader roster models, in roster order.
    pub fn followers_of(&self, leader: &str) -> Vec<String> {
        self.roster.iter().filter(|m| *m != leader).cloned().collect()
    }
}

/// A model paired with the backend that serves it.
#[derive(Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub backend: Arc<dyn Backend>,
}

impl Agent {
    pub fn new(config: AgentConfig, backend: Arc<dyn Backend>) -> Self {
        Self { config, backend }
    }
}

#[derive(Clone, Default)]
pub struct AgentPool {
    agents: BTreeMap<String, Agent>,
}

impl AgentPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, agent: Agent) {
        self.agents.insert(agent.config.model_name.clone(), agent);
    }

    pub fn with(mut self, agent: Agent) -> Self {
        self.insert(agent);
        self
    }

    pub fn get(&self, model: &str) -> Option<&Agent> {
        self.agents.get(model)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Agent)> {
        self.agents.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallOutcome {
    Ok,
    ParseError,
    BackendError,
}

/// One backend invocation, kept for auditing and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallLog {
    pub model: String,
    pub role: Role,
    pub round: u32,
    pub slot: Option<usize>,
    pub attempt: u32,
    pub latency_s: f64,
    pub outcome: CallOutcome,
    pub raw_text: Option<String>,
    pub error: Option<String>,
}

/// Why an agent call was abandoned.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "message", rename_all = "snake_case")]
pub enum CallFailure {
    #[error("unparseable response: {0}")]
    Parse(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

impl From<ParseError> for CallFailure {
    fn from(e: ParseError) -> Self {
        CallFailure::Parse(e.to_string())
    }
}

impl From<BackendError> for CallFailure {
    fn from(e: BackendError) -> Self {
        CallFailure::Backend(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u32,
    pub leader_prompt: PromptBundle,
    pub leader_proposal: Proposal,
    pub follower_prompts: Vec<PromptBundle>,
    /// Ordered by follower slot.
    pub feedback: Vec<FollowerFeedback>,
    pub consensus_after: bool,
}

/// Consensus holds exactly when every follower agrees.
pub fn consensus(feedback: &[FollowerFeedback]) -> bool {
    !feedback.is_empty() && feedback.iter().all(|f| f.stance == Stance::Agree)
}

/// Where a debate failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorStage {
    pub role: Role,
    pub model: String,
    pub round: u32,
    pub slot: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DebateOutcome {
    Consensus { final_proposal: Proposal, at_round: u32 },
    NonConsensus { final_proposal: Proposal, final_round: u32 },
    Error { stage: ErrorStage, cause: CallFailure },
}

impl DebateOutcome {
    pub fn is_consensus(&self) -> bool {
        matches!(self, DebateOutcome::Consensus { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateTiming {
    pub wall_time_s: f64,
    pub calls: Vec<CallLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateTranscript {
    pub entry_id: String,
    pub leader_model: String,
    pub follower_models: Vec<String>,
    pub rounds: Vec<RoundRecord>,
    pub outcome: DebateOutcome,
    pub timing: DebateTiming,
}

impl DebateTranscript {
    /// Checks the protocol invariants against `max_rounds`.
    pub fn check_invariants(&self, max_rounds: u32) -> Result<(), String> {
        if self.rounds.len() > max_rounds as usize {
            return Err(format!("{} rounds exceed the cap of {max_rounds}", self.rounds.len()));
        }
        for (i, r) in self.rounds.iter().enumerate() {
            if r.round_index as usize != i + 1 {
                return Err(format!("round {} recorded at position {}", r.round_index, i + 1));
            }
            if r.feedback.len() != FOLLOWER_COUNT {
                return Err(format!(
                    "round {} has {} feedback items",
                    r.round_index,
                    r.feedback.len()
                ));
            }
            if r.consensus_after != consensus(&r.feedback) {
                return Err(format!("round {} consensus flag disagrees with stances", r.round_index));
            }
            if r.consensus_after && i + 1 != self.rounds.len() {
                return Err(format!("round after consensus at round {}", r.round_index));
            }
        }
        match &self.outcome {
            DebateOutcome::Consensus {
                final_proposal,
                at_round,
            } => {
                let last = self.rounds.last().ok_or("consensus without rounds")?;
                if last.round_index != *at_round || !last.consensus_after {
                    return Err("consensus round mismatch".into());
                }
                if last.leader_proposal != *final_proposal {
                    return Err("final proposal is not the consensus round's leader proposal".into());
                }
            }
            DebateOutcome::NonConsensus { final_round, .. } => {
                if self.rounds.len() != max_rounds as usize || *final_round != max_rounds {
                    return Err("non-consensus before the round cap".into());
                }
                if self.rounds.iter().any(|r| r.consensus_after) {
                    return Err("non-consensus outcome with a consensus round".into());
                }
            }
            DebateOutcome::Error { .. } => {
                if self.rounds.iter().any(|r| r.consensus_after) {
                    return Err("error outcome after consensus".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub entry_id: String,
    pub model: String,
    pub proposal: Option<Proposal>,
    pub error: Option<CallFailure>,
    pub prompt: PromptBundle,
    pub latency_s: f64,
    pub calls: Vec<CallLog>,
}
