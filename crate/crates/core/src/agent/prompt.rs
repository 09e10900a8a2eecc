use std::collections::BTreeMap;

use super::{AgentConfig, AgentError, FollowerFeedback, PromptBundle, Proposal, Role, Stance, TemplateSet, Verdict};
use crate::dataset::InstructionEntry;

/// Which leader turn a prompt is for.
#[derive(Debug, Clone, Copy)]
pub enum LeaderTurn<'a> {
    Opening,
    Revision {
        round: u32,
        previous: &'a Proposal,
        feedback: &'a [FollowerFeedback],
    },
}

pub(crate) fn describe_proposal(proposal: &Proposal) -> String {
    let reasoning = if proposal.reasoning.is_empty() {
        "(none given)"
    } else {
        proposal.reasoning.as_str()
    };
    match &proposal.verdict {
        Verdict::Clear => format!(
            "Reasoning: {reasoning}\nVerdict: the instruction is clear and can be executed without clarification."
        ),
        Verdict::ClarifyingQuestion(q) => format!(
            "Reasoning: {reasoning}\nVerdict: the instruction is ambiguous. Proposed clarifying question: \"{q}\""
        ),
    }
}

pub(crate) fn describe_feedback(feedback: &[FollowerFeedback]) -> String {
    feedback
        .iter()
        .enumerate()
        .map(|(i, fb)| {
            let stance = match fb.stance {
                Stance::Agree => "AGREE",
                Stance::Disagree => "DISAGREE",
            };
            let alt = fb.alternative_question.as_deref().unwrap_or("none");
            format!(
                "Reviewer {}: {stance}\nReasoning: {}\nAlternative question: {alt}",
                i + 1,
                fb.reasoning
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

impl TemplateSet {
    fn base_values(entry: &InstructionEntry, config: &AgentConfig) -> BTreeMap<&'static str, String> {
        let mut values = BTreeMap::new();
        values.insert("context", entry.context.description.clone());
        values.insert("instruction", entry.ambiguous.clone());
        values.insert("sentence_limit", config.reasoning_sentence_limit.to_string());
        values
    }

    /// Single-round prompt for an agent working alone.
    pub fn baseline_prompt(&self, entry: &InstructionEntry, config: &AgentConfig) -> PromptBundle {
        let values = Self::base_values(entry, config);
        PromptBundle {
            system_text: self.system_proposer.render(&values),
            user_text: self.proposal.render(&values),
            role: Role::Baseline,
            round_index: 1,
        }
    }

    pub fn leader_prompt(
        &self,
        entry: &InstructionEntry,
        config: &AgentConfig,
        turn: LeaderTurn<'_>,
    ) -> Result<PromptBundle, AgentError> {
        let mut values = Self::base_values(entry, config);
        match turn {
            LeaderTurn::Opening => {
                values.insert("round", "1".into());
                Ok(PromptBundle {
                    system_text: self.system_proposer.render(&values),
                    user_text: self.proposal.render(&values),
                    role: Role::Leader,
                    round_index: 1,
                })
            }
            LeaderTurn::Revision {
                round,
                previous,
                feedback,
            } => {
                if round < 2 {
                    return Err(AgentError::RevisionRound(round));
                }
                if feedback.len() != 2 {
                    return Err(AgentError::FeedbackCount(feedback.len()));
                }
                values.insert("round", round.to_string());
                values.insert("proposal", describe_proposal(previous));
                values.insert("feedback", describe_feedback(feedback));
                Ok(PromptBundle {
                    system_text: self.system_proposer.render(&values),
                    user_text: self.revision.render(&values),
                    role: Role::Leader,
                    round_index: round,
                })
            }
        }
    }

    pub fn follower_prompt(
        &self,
        entry: &InstructionEntry,
        config: &AgentConfig,
        leader_proposal: &Proposal,
        round: u32,
    ) -> PromptBundle {
        let mut values = Self::base_values(entry, config);
        values.insert("round", round.to_string());
        values.insert("proposal", describe_proposal(leader_proposal));
        PromptBundle {
            system_text: self.system_follower.render(&values),
            user_text: self.follower.render(&values),
            role: Role::Follower,
            round_index: round,
        }
    }
}
