#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use ambidebate::agent::{AgentConfig, FollowerFeedback, PromptBundle, Proposal, Role, TemplateSet};
use ambidebate::backend::{Backend, ScriptRule, ScriptedBackend};
use ambidebate::dataset::{generate_dataset, DatasetCounts, InstructionEntry, ScenarioContext, Vocabulary};
use ambidebate::engine::{
    consensus, Agent, AgentPool, BaselineRecord, DebateConfig, DebateOutcome, DebateTiming, DebateTranscript, Engine,
    RoundRecord, TimingMode,
};

pub const ROSTER: [&str; 3] = ["alpha", "beta", "gamma"];

pub const AGREE: &str = "STANCE: AGREE\nREASONING: The question targets the vague word.\nALT_QUESTION: NONE";
pub const DISAGREE: &str =
    "STANCE: DISAGREE\nREASONING: Another reading remains open.\nALT_QUESTION: Which one do you mean?";

pub fn roster() -> Vec<String> {
    ROSTER.iter().map(|s| s.to_string()).collect()
}

pub fn dataset(seed: u64, per_type: usize) -> Vec<InstructionEntry> {
    generate_dataset(
        seed,
        DatasetCounts::per_type(per_type),
        &Vocabulary::default(),
        &ScenarioContext::default(),
    )
    .unwrap()
}

pub fn question(text: &str) -> String {
    format!("REASONING: The instruction leaves a detail open.\nVERDICT: QUESTION: {text}")
}

pub fn clear() -> String {
    "REASONING: Everything is specified.\nVERDICT: CLEAR".to_string()
}

/// Engine whose three agents share one scripted backend.
pub fn scripted_engine(rules: Vec<ScriptRule>, max_rounds: u32) -> Engine {
    let backend: Arc<dyn Backend> = Arc::new(ScriptedBackend::from_rules(rules));
    engine_with(backend, max_rounds)
}

pub fn engine_with(backend: Arc<dyn Backend>, max_rounds: u32) -> Engine {
    let mut pool = AgentPool::new();
    for m in ROSTER {
        pool.insert(Agent::new(AgentConfig::new(m), backend.clone()));
    }
    let mut config = DebateConfig::new(roster());
    config.max_rounds = max_rounds;
    config.timing = TimingMode::Simulated;
    config.retry.backoff_ms = 1;
    Engine::new(config, pool, TemplateSet::default()).unwrap()
}

/// Leader always asks one fixed question; followers answer with `follower`.
pub fn leader_and_followers(follower: Vec<ScriptRule>) -> Vec<ScriptRule> {
    let mut rules = vec![
        ScriptRule::respond([question("How many blocks should I move?")])
            .role(Role::Leader)
            .cycling(),
        ScriptRule::respond([question("How many blocks should I move?")])
            .role(Role::Baseline)
            .cycling(),
    ];
    rules.extend(follower);
    rules
}

fn prompt(role: Role, round: u32) -> PromptBundle {
    PromptBundle {
        system_text: String::new(),
        user_text: String::new(),
        role,
        round_index: round,
    }
}

/// A success or failure proposal for `entry` under the default term table.
pub fn proposal_for(entry: &InstructionEntry, success: bool) -> Proposal {
    if success {
        use ambidebate::dataset::AmbiguityType::*;
        let q = match entry.ambiguity_type {
            Numerical => "How many should I take?",
            AttributeNoun => "Which object do you mean?",
            AttributeColor => "What color do you mean?",
            Spatial => "Where should it go?",
        };
        Proposal::question("r", q)
    } else {
        Proposal::clear("r")
    }
}

/// A transcript ending in consensus at `at_round`.
pub fn consensus_transcript(
    entry: &InstructionEntry,
    leader: &str,
    at_round: u32,
    success: bool,
    time: f64,
) -> DebateTranscript {
    let final_proposal = proposal_for(entry, success);
    let rounds = (1..=at_round)
        .map(|r| {
            let feedback = if r == at_round {
                vec![FollowerFeedback::agree(""), FollowerFeedback::agree("")]
            } else {
                vec![FollowerFeedback::agree(""), FollowerFeedback::disagree("", None)]
            };
            RoundRecord {
                round_index: r,
                leader_prompt: prompt(Role::Leader, r),
                leader_proposal: final_proposal.clone(),
                follower_prompts: vec![prompt(Role::Follower, r), prompt(Role::Follower, r)],
                consensus_after: consensus(&feedback),
                feedback,
            }
        })
        .collect();
    transcript(
        entry,
        leader,
        rounds,
        DebateOutcome::Consensus {
            final_proposal,
            at_round,
        },
        time,
    )
}

pub fn nonconsensus_transcript(entry: &InstructionEntry, leader: &str, max_rounds: u32, time: f64) -> DebateTranscript {
    let final_proposal = proposal_for(entry, true);
    let rounds = (1..=max_rounds)
        .map(|r| RoundRecord {
            round_index: r,
            leader_prompt: prompt(Role::Leader, r),
            leader_proposal: final_proposal.clone(),
            follower_prompts: vec![prompt(Role::Follower, r), prompt(Role::Follower, r)],
            feedback: vec![
                FollowerFeedback::disagree("", None),
                FollowerFeedback::disagree("", None),
            ],
            consensus_after: false,
        })
        .collect();
    transcript(
        entry,
        leader,
        rounds,
        DebateOutcome::NonConsensus {
            final_proposal,
            final_round: max_rounds,
        },
        time,
    )
}

fn transcript(
    entry: &InstructionEntry,
    leader: &str,
    rounds: Vec<RoundRecord>,
    outcome: DebateOutcome,
    time: f64,
) -> DebateTranscript {
    DebateTranscript {
        entry_id: entry.id.clone(),
        leader_model: leader.to_string(),
        follower_models: ROSTER.iter().filter(|m| **m != leader).map(|s| s.to_string()).collect(),
        rounds,
        outcome,
        timing: DebateTiming {
            wall_time_s: time,
            calls: Vec::new(),
        },
    }
}

pub fn baseline(entry: &InstructionEntry, model: &str, success: bool) -> BaselineRecord {
    BaselineRecord {
        entry_id: entry.id.clone(),
        model: model.to_string(),
        proposal: Some(proposal_for(entry, success)),
        error: None,
        prompt: prompt(Role::Baseline, 0),
        latency_s: 0.0,
        calls: Vec::new(),
    }
}

/// `n` entries cycling through the generated ones under fresh ids.
pub fn synthetic_entries(n: usize) -> Vec<InstructionEntry> {
    let base = dataset(11, 20);
    (0..n)
        .map(|i| {
            let mut e = base[i % base.len()].clone();
            e.id = format!("syn-{i:05}");
            e
        })
        .collect()
}

/// One request as seen by the mock server.
#[derive(Debug, Clone)]
pub struct Recorded {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

/// Minimal HTTP/1.1 server answering chat completions with `reply(n)`, where
/// `n` counts completion requests from 0. `GET .../models` answers 200.
pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Recorded>>>,
}

impl MockServer {
    pub fn start(reply: impl Fn(usize) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = requests.clone();
        let reply = Arc::new(reply);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let log = log.clone();
                let reply = reply.clone();
                thread::spawn(move || serve(stream, &log, &*reply));
            }
        });
        Self { url, requests }
    }

    pub fn completions(&self) -> Vec<Recorded> {
        self.requests
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.method == "POST")
            .cloned()
            .collect()
    }
}

/// Chat-completions JSON wrapping `content`.
pub fn chat_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": 10, "completion_tokens": 5}
    })
    .to_string()
}

fn serve(stream: TcpStream, log: &Mutex<Vec<Recorded>>, reply: &(dyn Fn(usize) -> (u16, String) + Send + Sync)) {
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let mut parts = line.split_whitespace();
        let method = parts.next().unwrap_or_default().to_string();
        let path = parts.next().unwrap_or_default().to_string();
        let mut headers = Vec::new();
        let mut length = 0;
        loop {
            let mut h = String::new();
            if reader.read_line(&mut h).unwrap_or(0) == 0 {
                return;
            }
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
                if k == "content-length" {
                    length = v.parse().unwrap_or(0);
                }
                headers.push((k, v));
            }
        }
        let mut body = vec![0; length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        let (status, text) = if method == "GET" {
            (200, r#"{"data":[]}"#.to_string())
        } else {
            let n = {
                let guard = log.lock().unwrap();
                guard.iter().filter(|r| r.method == "POST").count()
            };
            reply(n)
        };
        log.lock().unwrap().push(Recorded {
            method,
            path,
            headers,
            body: String::from_utf8_lossy(&body).into_owned(),
        });
        let response = format!(
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{text}",
            text.len()
        );
        if writer.write_all(response.as_bytes()).is_err() {
            return;
        }
    }
}
