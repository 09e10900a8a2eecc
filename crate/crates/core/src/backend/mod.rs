//! Response generators. The engine only ever sees the raw text a backend
//! returns, so HTTP, scripted and stochastic backends are interchangeable.

mod http;
mod scripted;
mod stochastic;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{AgentConfig, PromptBundle, Proposal, Role};
use crate::dataset::InstructionEntry;

pub use http::{HttpBackend, DEFAULT_HTTP_TIMEOUT_S};
pub use scripted::{Script, ScriptRule, ScriptedBackend};
pub use stochastic::{StochasticBackend, StochasticPolicy};

/// Models used when no roster is configured.
pub const DEFAULT_ROSTER: [&str; 3] = ["Llama3-8B-instruct", "Gemma2-9B-it", "Mistral-7B-instruct"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Scripted,
    Stochastic,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Http => "http",
            BackendKind::Scripted => "scripted",
            BackendKind::Stochastic => "stochastic",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("network error: {0}")]
    Network(String),
    #[error("http status {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("script exhausted for {0}")]
    ScriptExhausted(String),
    #[error("no script rule matches {0}")]
    NoScript(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

impl BackendError {
    /// Transport failures worth retrying with backoff.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Network(_) => true,
            BackendError::HttpStatus { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Identifies one model call within a run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CallContext {
    pub entry_id: String,
    pub model: String,
    pub role: Role,
    pub round: u32,
    /// Leader of the enclosing debate; `None` for baseline calls.
    pub leader_model: Option<String>,
    /// Follower position (0 or 1) for follower calls.
    pub follower_slot: Option<usize>,
    /// 0 for the first attempt, incremented on every regeneration.
    pub attempt: u32,
}

impl CallContext {
    pub fn baseline(entry_id: &str, model: &str) -> Self {
        Self {
            entry_id: entry_id.to_string(),
            model: model.to_string(),
            role: Role::Baseline,
            round: 1,
            leader_model: None,
            follower_slot: None,
            attempt: 0,
        }
    }

    pub fn leader(entry_id: &str, model: &str, round: u32) -> Self {
        Self {
            entry_id: entry_id.to_string(),
            model: model.to_string(),
            role: Role::Leader,
            round,
            leader_model: Some(model.to_string()),
            follower_slot: None,
            attempt: 0,
        }
    }

    pub fn follower(entry_id: &str, model: &str, leader: &str, round: u32, slot: usize) -> Self {
        Self {
            entry_id: entry_id.to_string(),
            model: model.to_string(),
            role: Role::Follower,
            round,
            leader_model: Some(leader.to_string()),
            follower_slot: Some(slot),
            attempt: 0,
        }
    }

    /// Seed for an independent random stream per call, derived from the run
    /// seed and every field of the context.
    pub fn stream_seed(&self, seed: u64) -> u64 {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        for part in [
            self.entry_id.as_str(),
            self.model.as_str(),
            self.leader_model.as_deref().unwrap_or("-"),
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        h.update([self.role as u8]);
        h.update(self.round.to_le_bytes());
        h.update((self.follower_slot.map_or(u64::MAX, |s| s as u64)).to_le_bytes());
        h.update(self.attempt.to_le_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
    }
}

impl fmt::Display for CallContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{} round {}", self.entry_id, self.model, self.role, self.round)?;
        if let Some(slot) = self.follower_slot {
            write!(f, " slot {slot}")?;
        }
        Ok(())
    }
}

/// Everything a backend may look at when producing a response. The HTTP
/// backend uses only the prompt and config; simulated backends also read the
/// entry and, for followers, the leader's proposal.
#[derive(Debug, Clone, Copy)]
pub struct GenerationRequest<'a> {
    pub prompt: &'a PromptBundle,
    pub config: &'a AgentConfig,
    pub call: &'a CallContext,
    pub entry: &'a InstructionEntry,
    pub leader_proposal: Option<&'a Proposal>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub raw_text: String,
    /// Seconds. Wall-clock for live backends, simulated for the others.
    pub latency_s: f64,
    pub token_usage: Option<TokenUsage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeStatus {
    pub healthy: bool,
    pub detail: String,
}

impl ProbeStatus {
    pub fn healthy(detail: impl Into<String>) -> Self {
        Self {
            healthy: true,
            detail: detail.into(),
        }
    }

    pub fn unhealthy(detail: impl Into<String>) -> Self {
        Self {
            healthy: false,
            detail: detail.into(),
        }
    }
}

pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<GenerationRecord, BackendError>;

    /// Reports readiness without side effects on later generations.
    fn probe(&self) -> ProbeStatus;
}
