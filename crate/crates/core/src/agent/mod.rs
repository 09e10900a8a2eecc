//! Role prompts and the line-oriented response grammar agents answer in.
//!
//! Proposals (baseline and leader turns):
//!
//! ```text
//! REASONING: <free text, may span lines>
//! VERDICT: CLEAR
//! VERDICT: QUESTION: <one clarifying question>
//! ```
//!
//! Follower feedback:
//!
//! ```text
//! STANCE: AGREE | DISAGREE
//! REASONING: <free text>
//! ALT_QUESTION: <question> | NONE
//! ```
//!
//! Keys are case-insensitive and must start a line; text before the first
//! marker is ignored.

mod parse;
mod prompt;
mod template;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_feedback, parse_proposal, render_feedback, render_proposal, ParseError};
pub use prompt::LeaderTurn;
pub use template::{TemplateError, TemplateSet};

pub const DEFAULT_TEMPERATURE: f64 = 0.5;
pub const DEFAULT_MAX_TOKENS: u32 = 350;
pub const DEFAULT_SENTENCE_LIMIT: u32 = 4;

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("invalid agent config for {model}: {reason}")]
    InvalidConfig { model: String, reason: String },
    #[error("leader revision needs feedback from exactly 2 followers, got {0}")]
    FeedbackCount(usize),
    #[error("leader revision rounds start at 2, got {0}")]
    RevisionRound(u32),
}

/// Generation parameters shared by every call made on behalf of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_sentence_limit")]
    pub reasoning_sentence_limit: u32,
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

impl AgentConfig {
    pub fn new(model_name: impl Into<String>) -> Self {
        Self {
            model_name: model_name.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            reasoning_sentence_limit: DEFAULT_SENTENCE_LIMIT,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |reason: &str| {
            Err(AgentError::InvalidConfig {
                model: self.model_name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.model_name.trim().is_empty() {
            return bad("model name is empty");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must lie in [0, 2]");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be at least 1");
        }
        if self.reasoning_sentence_limit == 0 {
            return bad("reasoning sentence limit must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "question", rename_all = "snake_case")]
pub enum Verdict {
    Clear,
    ClarifyingQuestion(String),
}

impl Verdict {
    pub fn question(&self) -> Option<&str> {
        match self {
            Verdict::Clear => None,
            Verdict::ClarifyingQuestion(q) => Some(q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub reasoning: String,
    pub verdict: Verdict,
}

impl Proposal {
    pub fn clear(reasoning: impl Into<String>) -> Self {
        Self {
            reasoning: reasoning.into(),
            verdict: Verdict::Clear,
        }
    }

    pub fn question(reasoning: impl Into<String>, question: impl Into<String>) -> Self {
        Self {
            reasoning: reasoning.into(),
            verdict: Verdict::ClarifyingQuestion(question.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Agree,
    Disagree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowerFeedback {
    pub stance: Stance,
    pub reasoning: String,
    pub alternative_question: Option<String>,
}

impl FollowerFeedback {
    pub fn agree(reasoning: impl Into<String>) -> Self {
        Self {
            stance: Stance::Agree,
            reasoning: reasoning.into(),
            alternative_question: None,
        }
    }

    pub fn disagree(reasoning: impl Into<String>, alternative: Option<String>) -> Self {
        Self {
            stance: Stance::Disagree,
            reasoning: reasoning.into(),
            alternative_question: alternative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Baseline,
    Leader,
    Follower,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Baseline => "baseline",
            Role::Leader => "leader",
            Role::Follower => "follower",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub role: Role,
    pub round_index: u32,
}
