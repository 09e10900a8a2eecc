use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendKind, CallContext, GenerationRecord, GenerationRequest, ProbeStatus};
use crate::agent::Role;

/// One queue of canned responses, selected by matching call attributes.
/// Unset attributes match anything; the most specific matching rule wins and
/// ties go to the rule declared first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<String>,
    pub responses: Vec<String>,
    /// Wrap around instead of failing once the queue is consumed.
    #[serde(default)]
    pub cycle: bool,
}

impl ScriptRule {
    pub fn respond<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self {
            responses: responses.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn role(mut self, role: Role) -> Self {
        self.role = Some(role);
        self
    }

    pub fn round(mut self, round: u32) -> Self {
        self.round = Some(round);
        self
    }

    pub fn slot(mut self, slot: usize) -> Self {
        self.slot = Some(slot);
        self
    }

    pub fn entry(mut self, id: impl Into<String>) -> Self {
        self.entry_id = Some(id.into());
        self
    }

    pub fn model(mut self, model: impl Into<String>) -> Self {
        self.model = Some(model.into());
        self
    }

    pub fn leader(mut self, leader: impl Into<String>) -> Self {
        self.leader = Some(leader.into());
        self
    }

    pub fn cycling(mut self) -> Self {
        self.cycle = true;
        self
    }

    /// `None` if the rule does not apply, otherwise its specificity.
    fn score(&self, call: &CallContext) -> Option<usize> {
        let checks = [
            self.entry_id.as_ref().map(|e| *e == call.entry_id),
            self.model.as_ref().map(|m| *m == call.model),
            self.role.map(|r| r == call.role),
            self.round.map(|r| r == call.round),
            self.slot.map(|s| Some(s) == call.follower_slot),
            self.leader.as_ref().map(|l| Some(l) == call.leader_model.as_ref()),
        ];
        let mut score = 0;
        for check in checks.into_iter().flatten() {
            if !check {
                return None;
            }
            score += 1;
        }
        Some(score)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub rules: Vec<ScriptRule>,
    /// Simulated latency reported for every response, in seconds.
    #[serde(default)]
    pub latency_s: f64,
}

impl Script {
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        serde_json::from_str(text).map_err(|e| BackendError::Config(format!("script: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("reading script {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

type CursorKey = (usize, String, String, Option<String>, Role, u32, Option<usize>);

/// Deterministic backend that replays queued responses. Each distinct call
/// position (entry, model, leader, role, round, slot) has its own cursor into
/// the matching rule, so regenerations advance through the queue while
/// concurrent debates never disturb one another.
pub struct ScriptedBackend {
    script: Script,
    cursors: Mutex<HashMap<CursorKey, usize>>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self {
            script,
            cursors: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_rules(rules: Vec<ScriptRule>) -> Self {
        Self::new(Script { rules, latency_s: 0.0 })
    }

    /// Every call returns `text`.
    pub fn constant(text: impl Into<String>) -> Self {
        Self::from_rules(vec![ScriptRule::respond([text.into()]).cycling()])
    }

    fn select(&self, call: &CallContext) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for (i, rule) in self.script.rules.iter().enumerate() {
            if let Some(score) = rule.score(call) {
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((i, score));
                }
            }
        }
        best.map(|(i, _)| i)
    }
}

impl Backend for ScriptedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<GenerationRecord, BackendError> {
        let call = request.call;
        let index = self
            .select(call)
            .ok_or_else(|| BackendError::NoScript(call.to_string()))?;
        let rule = &self.script.rules[index];
        let key = (
            index,
            call.entry_id.clone(),
            call.model.clone(),
            call.leader_model.clone(),
            call.role,
            call.round,
            call.follower_slot,
        );
        let position = {
            let mut cursors = self.cursors.lock().expect("script cursor lock poisoned");
            let cursor = cursors.entry(key).or_insert(0);
            let position = *cursor;
            *cursor += 1;
            position
        };
        let text = if position < rule.responses.len() {
            &rule.responses[position]
        } else if rule.cycle && !rule.responses.is_empty() {
            &rule.responses[position % rule.responses.len()]
        } else {
            return Err(BackendError::ScriptExhausted(call.to_string()));
        };
        Ok(GenerationRecord {
            raw_text: text.clone(),
            latency_s: self.script.latency_s,
            token_usage: None,
        })
    }

    fn probe(&self) -> ProbeStatus {
        ProbeStatus::healthy(format!("scripted ({} rules)", self.script.rules.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{AgentConfig, PromptBundle};
    use crate::dataset::{generate_dataset, DatasetCounts, InstructionEntry, ScenarioContext, Vocabulary};

    fn entry() -> InstructionEntry {
        generate_dataset(
            0,
            DatasetCounts::per_type(1),
            &Vocabulary::default(),
            &ScenarioContext::default(),
        )
        .unwrap()
        .remove(0)
    }

    fn call(backend: &ScriptedBackend, ctx: &CallContext) -> Result<String, BackendError> {
        let e = entry();
        let prompt = PromptBundle {
            system_text: String::new(),
            user_text: String::new(),
            role: ctx.role,
            round_index: ctx.round,
        };
        let cfg = AgentConfig::new(&ctx.model);
        backend
            .generate(&GenerationRequest {
                prompt: &prompt,
                config: &cfg,
                call: ctx,
                entry: &e,
                leader_proposal: None,
            })
            .map(|r| r.raw_text)
    }

    #[test]
    fn returns_queued_text_verbatim() {
        let b = ScriptedBackend::from_rules(vec![ScriptRule::respond(["VERDICT: CLEAR"])]);
        assert_eq!(call(&b, &CallContext::baseline("e", "m")).unwrap(), "VERDICT: CLEAR");
    }

    #[test]
    fn queue_advances_per_call_position_then_exhausts() {
        let b = ScriptedBackend::from_rules(vec![ScriptRule::respond(["first", "second"])]);
        let ctx = CallContext::baseline("e", "m");
        assert_eq!(call(&b, &ctx).unwrap(), "first");
        assert_eq!(call(&b, &ctx).unwrap(), "second");
        assert!(matches!(call(&b, &ctx), Err(BackendError::ScriptExhausted(_))));
        // a different entry has its own cursor
        assert_eq!(call(&b, &CallContext::baseline("other", "m")).unwrap(), "first");
    }

    #[test]
    fn most_specific_rule_wins() {
        let b = ScriptedBackend::from_rules(vec![
            ScriptRule::respond(["generic"]).role(Role::Follower).cycling(),
            ScriptRule::respond(["slot1 round2"])
                .role(Role::Follower)
                .round(2)
                .slot(1),
        ]);
        assert_eq!(
            call(&b, &CallContext::follower("e", "f", "l", 2, 1)).unwrap(),
            "slot1 round2"
        );
        assert_eq!(
            call(&b, &CallContext::follower("e", "f", "l", 2, 0)).unwrap(),
            "generic"
        );
        assert!(matches!(
            call(&b, &CallContext::leader("e", "l", 1)),
            Err(BackendError::NoScript(_))
        ));
    }

    #[test]
    fn cycling_rule_never_exhausts() {
        let b = ScriptedBackend::constant("x");
        let ctx = CallContext::baseline("e", "m");
        for _ in 0..5 {
            assert_eq!(call(&b, &ctx).unwrap(), "x");
        }
        assert!(b.probe().healthy);
    }

    #[test]
    fn script_json_schema() {
        let s = Script::from_json(
            r#"{"rules":[{"role":"follower","round":2,"responses":["STANCE: AGREE"],"cycle":true}],"latency_s":1.5}"#,
        )
        .unwrap();
        assert_eq!(s.rules[0].role, Some(Role::Follower));
        assert_eq!(s.latency_s, 1.5);
        assert!(Script::from_json(r#"{"rules":[{"role":"boss","responses":[]}]}"#).is_err());
    }
}
