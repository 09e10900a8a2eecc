use std::time::{Duration, Instant};

use tracing::debug;

use super::{
    consensus, Agent, AgentPool, BaselineRecord, CallFailure, CallLog, CallOutcome, DebateConfig, DebateOutcome,
    DebateTiming, DebateTranscript, EngineError, ErrorStage, RoundRecord, TimingMode,
};
use crate::agent::{
    parse_feedback, parse_proposal, FollowerFeedback, LeaderTurn, ParseError, PromptBundle, Proposal, TemplateSet,
};
use crate::backend::{CallContext, GenerationRequest};
use crate::dataset::InstructionEntry;

pub struct Engine {
    config: DebateConfig,
    agents: AgentPool,
    templates: TemplateSet,
}

struct CallResult<T> {
    value: Result<T, CallFailure>,
    logs: Vec<CallLog>,
}

impl<T> CallResult<T> {
    fn latency(&self) -> f64 {
        self.logs.iter().map(|l| l.latency_s).sum()
    }
}

impl Engine {
    pub fn new(config: DebateConfig, agents: AgentPool, templates: TemplateSet) -> Result<Self, EngineError> {
        config.validate()?;
        for model in &config.roster {
            let agent = agents
                .get(model)
                .ok_or_else(|| EngineError::UnknownModel(model.clone()))?;
            agent
                .config
                .validate()
                .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        }
        Ok(Self {
            config,
            agents,
            templates,
        })
    }

    pub fn config(&self) -> &DebateConfig {
        &self.config
    }

    pub fn agents(&self) -> &AgentPool {
        &self.agents
    }

    fn agent(&self, model: &str) -> Result<&Agent, EngineError> {
        self.agents
            .get(model)
            .ok_or_else(|| EngineError::UnknownModel(model.to_string()))
    }

    /// Generates and parses one response, regenerating on parse failures and
    /// retrying retryable transport failures within the configured budget.
    fn call<T>(
        &self,
        agent: &Agent,
        prompt: &PromptBundle,
        mut ctx: CallContext,
        entry: &InstructionEntry,
        leader_proposal: Option<&Proposal>,
        parse: fn(&str) -> Result<T, ParseError>,
    ) -> CallResult<T> {
        let budget = self.config.retry;
        let mut logs = Vec::new();
        let mut parse_failures = 0;
        let mut transport_failures = 0;
        loop {
            let request = GenerationRequest {
                prompt,
                config: &agent.config,
                call: &ctx,
                entry,
                leader_proposal,
            };
            let started = Instant::now();
            let generated = agent.backend.generate(&request);
            let measured = started.elapsed().as_secs_f64();
            let mut log = CallLog {
                model: ctx.model.clone(),
                role: ctx.role,
                round: ctx.round,
                slot: ctx.follower_slot,
                attempt: ctx.attempt,
                latency_s: 0.0,
                outcome: CallOutcome::Ok,
                raw_text: None,
                error: None,
            };
            match generated {
                Ok(record) => {
                    log.latency_s = match self.config.timing {
                        TimingMode::Wall => measured,
                        TimingMode::Simulated => record.latency_s,
                    };
                    let parsed = parse(&record.raw_text);
                    log.raw_text = Some(record.raw_text);
                    match parsed {
                        Ok(value) => {
                            logs.push(log);
                            return CallResult { value: Ok(value), logs };
                        }
                        Err(e) => {
                            debug!(call = %ctx, error = %e, "unparseable response");
                            log.outcome = CallOutcome::ParseError;
                            log.error = Some(e.to_string());
                            logs.push(log);
                            if parse_failures >= budget.parse {
                                return CallResult {
                                    value: Err(e.into()),
                                    logs,
                                };
                            }
                            parse_failures += 1;
                        }
                    }
                }
                Err(e) => {
                    debug!(call = %ctx, error = %e, "backend failure");
                    log.latency_s = match self.config.timing {
                        TimingMode::Wall => measured,
                        TimingMode::Simulated => 0.0,
                    };
                    log.outcome = CallOutcome::BackendError;
                    log.error = Some(e.to_string());
                    logs.push(log);
                    if !e.is_retryable() || transport_failures >= budget.transport {
                        return CallResult {
                            value: Err(e.into()),
                            logs,
                        };
                    }
                    let delay = budget.backoff_ms.saturating_mul(1 << transport_failures.min(16));
                    std::thread::sleep(Duration::from_millis(delay));
                    transport_failures += 1;
                }
            }
            ctx.attempt += 1;
        }
    }

    /// One model answering alone in a single round.
    pub fn run_baseline(&self, entry: &InstructionEntry, model: &str) -> Result<BaselineRecord, EngineError> {
        let agent = self.agent(model)?;
        let started = Instant::now();
        let prompt = self.templates.baseline_prompt(entry, &agent.config);
        let result = self.call(
            agent,
            &prompt,
            CallContext::baseline(&entry.id, model),
            entry,
            None,
            parse_proposal,
        );
        let latency_s = match self.config.timing {
            TimingMode::Wall => started.elapsed().as_secs_f64(),
            TimingMode::Simulated => result.latency(),
        };
        let (proposal, error) = match result.value {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e)),
        };
        Ok(BaselineRecord {
            entry_id: entry.id.clone(),
            model: model.to_string(),
            proposal,
            error,
            prompt,
            latency_s,
            calls: result.logs,
        })
    }

    fn evaluate(
        &self,
        entry: &InstructionEntry,
        leader: &str,
        followers: &[(&str, &Agent)],
        proposal: &Proposal,
        round: u32,
    ) -> Vec<(PromptBundle, CallResult<FollowerFeedback>)> {
        let one = |slot: usize| {
            let (model, agent) = followers[slot];
            let prompt = self.templates.follower_prompt(entry, &agent.config, proposal, round);
            let ctx = CallContext::follower(&entry.id, model, leader, round, slot);
            let result = self.call(agent, &prompt, ctx, entry, Some(proposal), parse_feedback);
            (prompt, result)
        };
        if self.config.concurrent_followers {
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..followers.len()).map(|slot| s.spawn(move || one(slot))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("follower evaluation panicked"))
                    .collect()
            })
        } else {
            // a failed follower ends the debate, so later slots are not asked
            let mut out = Vec::with_capacity(followers.len());
            for slot in 0..followers.len() {
                let evaluation = one(slot);
                let failed = evaluation.1.value.is_err();
                out.push(evaluation);
                if failed {
                    break;
                }
            }
            out
        }
    }

    /// Runs the leader–follower protocol for one entry with `leader` proposing.
    pub fn run_debate(&self, entry: &InstructionEntry, leader: &str) -> Result<DebateTranscript, EngineError> {
        let started = Instant::now();
        let leader_agent = self.agent(leader)?;
        if !self.config.roster.iter().any(|m| m == leader) {
            return Err(EngineError::UnknownModel(leader.to_string()));
        }
        let follower_models = self.config.followers_of(leader);
        let followers: Vec<(&str, &Agent)> = follower_models
            .iter()
            .map(|m| self.agent(m).map(|a| (m.as_str(), a)))
            .collect::<Result<_, _>>()?;

        let mut rounds: Vec<RoundRecord> = Vec::new();
        let mut calls = Vec::new();
        let mut simulated = 0.0;
        let mut outcome = None;

        for round in 1..=self.config.max_rounds {
            let turn = match rounds.last() {
                None => LeaderTurn::Opening,
                Some(prev) => LeaderTurn::Revision {
                    round,
                    previous: &prev.leader_proposal,
                    feedback: &prev.feedback,
                },
            };
            let leader_prompt = self
                .templates
                .leader_prompt(entry, &leader_agent.config, turn)
                .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
            let ctx = CallContext::leader(&entry.id, leader, round);
            let proposed = self.call(leader_agent, &leader_prompt, ctx, entry, None, parse_proposal);
            simulated += proposed.latency();
            calls.extend(proposed.logs);
            let proposal = match proposed.value {
                Ok(p) => p,
                Err(cause) => {
                    outcome = Some(DebateOutcome::Error {
                        stage: ErrorStage {
                            role: crate::agent::Role::Leader,
                            model: leader.to_string(),
                            round,
                            slot: None,
                        },
                        cause,
                    });
                    break;
                }
            };

            let evaluations = self.evaluate(entry, leader, &followers, &proposal, round);
            let latencies: Vec<f64> = evaluations.iter().map(|(_, r)| r.latency()).collect();
            simulated += if self.config.concurrent_followers {
                latencies.iter().cloned().fold(0.0, f64::max)
            } else {
                latencies.iter().sum()
            };
            let mut follower_prompts = Vec::new();
            let mut feedback = Vec::new();
            let mut failure = None;
            for (slot, (prompt, result)) in evaluations.into_iter().enumerate() {
                calls.extend(result.logs);
                follower_prompts.push(prompt);
                match result.value {
                    Ok(fb) => feedback.push(fb),
                    Err(cause) if failure.is_none() => failure = Some((slot, cause)),
                    Err(_) => {}
                }
            }
            if let Some((slot, cause)) = failure {
                outcome = Some(DebateOutcome::Error {
                    stage: ErrorStage {
                        role: crate::agent::Role::Follower,
                        model: followers[slot].0.to_string(),
                        round,
                        slot: Some(slot),
                    },
                    cause,
                });
                break;
            }

            let agreed = consensus(&feedback);
            rounds.push(RoundRecord {
                round_index: round,
                leader_prompt,
                leader_proposal: proposal.clone(),
                follower_prompts,
                feedback,
                consensus_after: agreed,
            });
            if agreed {
                outcome = Some(DebateOutcome::Consensus {
                    final_proposal: proposal,
                    at_round: round,
                });
                break;
            }
        }

        let outcome = outcome.unwrap_or_else(|| {
            let last = rounds.last().expect("max_rounds >= 1 so a round was recorded");
            DebateOutcome::NonConsensus {
                final_proposal: last.leader_proposal.clone(),
                final_round: last.round_index,
            }
        });
        let wall_time_s = match self.config.timing {
            TimingMode::Wall => started.elapsed().as_secs_f64(),
            TimingMode::Simulated => simulated,
        };
        Ok(DebateTranscript {
            entry_id: entry.id.clone(),
            leader_model: leader.to_string(),
            follower_models,
            rounds,
            outcome,
            timing: DebateTiming { wall_time_s, calls },
        })
    }

    /// One debate per roster model acting as leader, in roster order.
    pub fn run_rotation(&self, entry: &InstructionEntry) -> Result<Vec<DebateTranscript>, EngineError> {
        self.config
            .roster
            .iter()
            .map(|leader| self.run_debate(entry, leader))
            .collect()
    }
}
