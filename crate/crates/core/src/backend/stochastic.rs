use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendKind, GenerationRecord, GenerationRequest, ProbeStatus};
use crate::agent::{render_feedback, render_proposal, FollowerFeedback, Proposal, Role, Verdict};
use crate::dataset::{AmbiguityType, InstructionEntry};

/// Parameters of the simulated agent population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticPolicy {
    /// Probability that a proposer (baseline or leader) flags the entry as
    /// ambiguous, per model and ambiguity type.
    #[serde(default)]
    pub detect_prob: BTreeMap<String, BTreeMap<AmbiguityType, f64>>,
    /// Used for any (model, type) pair missing from `detect_prob`.
    #[serde(default = "half")]
    pub default_detect_prob: f64,
    pub agree_prob_given_question: f64,
    pub agree_prob_given_clear: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Mean simulated latency per call, per model, in seconds.
    #[serde(default)]
    pub mean_latency_s: BTreeMap<String, f64>,
}

fn half() -> f64 {
    0.5
}

impl StochasticPolicy {
    pub fn uniform(detect: f64, agree_given_question: f64, agree_given_clear: f64, seed: u64) -> Self {
        Self {
            detect_prob: BTreeMap::new(),
            default_detect_prob: detect,
            agree_prob_given_question: agree_given_question,
            agree_prob_given_clear: agree_given_clear,
            rng_seed: seed,
            mean_latency_s: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let check = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(BackendError::Config(format!("{name} = {p} is not a probability")))
            }
        };
        check("default_detect_prob", self.default_detect_prob)?;
        check("agree_prob_given_question", self.agree_prob_given_question)?;
        check("agree_prob_given_clear", self.agree_prob_given_clear)?;
        for (model, per_type) in &self.detect_prob {
            for (kind, p) in per_type {
                check(&format!("detect_prob[{model}][{kind}]"), *p)?;
            }
        }
        for (model, l) in &self.mean_latency_s {
            if !(l.is_finite() && *l >= 0.0) {
                return Err(BackendError::Config(format!("mean_latency_s[{model}] must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn detect(&self, model: &str, kind: AmbiguityType) -> f64 {
        self.detect_prob
            .get(model)
            .and_then(|m| m.get(&kind))
            .copied()
            .unwrap_or(self.default_detect_prob)
    }
}

/// Samples marker-grammar responses from a [`StochasticPolicy`]. Every call
/// draws from its own ChaCha8 stream seeded by the call context, so results do
/// not depend on call order or thread interleaving.
pub struct StochasticBackend {
    model: String,
    policy: Arc<StochasticPolicy>,
}

impl StochasticBackend {
    pub fn new(model: impl Into<String>, policy: Arc<StochasticPolicy>) -> Result<Self, BackendError> {
        policy.validate()?;
        Ok(Self {
            model: model.into(),
            policy,
        })
    }
}

pub(crate) fn targeted_question(entry: &InstructionEntry) -> String {
    let s = &entry.slots;
    match entry.ambiguity_type {
        AmbiguityType::Numerical => format!("How many {} {}s should I {}?", s.object_color, s.object_noun, s.action),
        AmbiguityType::AttributeNoun => format!(
            "What kind of object do you mean by \"{}\"?",
            s.noun_substitute.as_deref().unwrap_or(&s.object_noun)
        ),
        AmbiguityType::AttributeColor => format!(
            "Which color do you mean by \"{}\"?",
            s.color_substitute.as_deref().unwrap_or(&s.object_color)
        ),
        AmbiguityType::Spatial => format!(
            "Where exactly relative to the {} should I {} it?",
            s.landmark_phrase(),
            s.action
        ),
    }
}

fn reasoning_for(entry: &InstructionEntry, ambiguous: bool) -> String {
    let term = entry
        .slots
        .substitution(entry.ambiguity_type)
        .map(|(vague, _)| vague)
        .unwrap_or("the instruction");
    if ambiguous {
        format!("The phrase \"{term}\" admits more than one reading in this scene.")
    } else {
        "Every object and location in the instruction can be identified in the scene.".to_string()
    }
}

impl Backend for StochasticBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Stochastic
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<GenerationRecord, BackendError> {
        let mut rng = ChaCha8Rng::seed_from_u64(request.call.stream_seed(self.policy.rng_seed));
        let entry = request.entry;
        let text = match request.call.role {
            Role::Baseline | Role::Leader => {
                let p = self.policy.detect(&self.model, entry.ambiguity_type);
                let proposal = if rng.random_bool(p) {
                    Proposal::question(reasoning_for(entry, true), targeted_question(entry))
                } else {
                    Proposal::clear(reasoning_for(entry, false))
                };
                render_proposal(&proposal)
            }
            Role::Follower => {
                let leader = request
                    .leader_proposal
                    .ok_or_else(|| BackendError::Protocol("follower call without a leader proposal".into()))?;
                let p = match leader.verdict {
                    Verdict::Clear => self.policy.agree_prob_given_clear,
                    Verdict::ClarifyingQuestion(_) => self.policy.agree_prob_given_question,
                };
                let feedback = if rng.random_bool(p) {
                    FollowerFeedback::agree("The proposal matches my reading of the instruction.")
                } else {
                    match leader.verdict {
                        Verdict::Clear => {
                            FollowerFeedback::disagree(reasoning_for(entry, true), Some(targeted_question(entry)))
                        }
                        Verdict::ClarifyingQuestion(_) => FollowerFeedback::disagree(
                            "The proposed question does not address the real source of doubt.",
                            Some(targeted_question(entry)),
                        ),
                    }
                };
                render_feedback(&feedback)
            }
        };
        let latency_s = match self.policy.mean_latency_s.get(&self.model) {
            Some(mean) => mean * rng.random_range(0.5..1.5),
            None => 0.0,
        };
        Ok(GenerationRecord {
            raw_text: text,
            latency_s,
            token_usage: None,
        })
    }

    fn probe(&self) -> ProbeStatus {
        ProbeStatus::healthy(format!("stochastic (seed {})", self.policy.rng_seed))
    }
}
