//! End-to-end acceptance checks, one PASS/FAIL line per criterion.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ambidebate::agent::{AgentConfig, FollowerFeedback, Role, Stance, TemplateSet, Verdict};
use ambidebate::backend::{Backend, HttpBackend, ScriptRule, StochasticBackend, StochasticPolicy};
use ambidebate::dataset::{AmbiguityType, Category, InstructionEntry};
use ambidebate::engine::{
    consensus, Agent, AgentPool, CallFailure, DebateConfig, DebateOutcome, DebateTranscript, Engine, MemorySink,
    TimingMode,
};
use ambidebate::eval::{compute_report, emit_reports, ReportOptions, TermTable};
use common::*;
use serde_json::Value;

fn main() {
    let criteria: [(&str, fn()); 8] = [
        ("generator invariants on 60 entries", generator_properties),
        ("protocol traces", protocol_traces),
        ("leader rotation counts", rotation),
        ("metric pipeline fixture", metric_fixture),
        ("table emission", table_emission),
        ("monte-carlo round-1 consensus", monte_carlo),
        ("http fidelity", http_fidelity),
        ("end-to-end determinism", determinism),
    ];
    std::panic::set_hook(Box::new(|info| eprintln!("    {info}")));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let ok = catch_unwind(AssertUnwindSafe(check)).is_ok();
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {}: {name} ({:.2}s)",
            i + 1,
            started.elapsed().as_secs_f64()
        );
        if !ok {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn generator_properties() {
    let started = Instant::now();
    let data = dataset(2024, 20);
    assert!(
        started.elapsed() < Duration::from_secs(1),
        "generation took {:?}",
        started.elapsed()
    );
    assert_eq!(data.len(), 60);

    let mut by_category: BTreeMap<Category, usize> = BTreeMap::new();
    let mut ids = HashSet::new();
    let mut texts = HashSet::new();
    for e in &data {
        *by_category.entry(e.ambiguity_type.category()).or_default() += 1;
        assert!(ids.insert(e.id.clone()), "duplicate id {}", e.id);
        assert!(
            texts.insert(e.ambiguous.clone()),
            "duplicate instruction {}",
            e.ambiguous
        );
        e.validate().unwrap_or_else(|(p, m)| panic!("{}: {p}: {m}", e.id));

        // pair difference: one contiguous substitution
        let (a, u) = (e.ambiguous.as_bytes(), e.unambiguous.as_bytes());
        let prefix = a.iter().zip(u).take_while(|(x, y)| x == y).count();
        let suffix = a.iter().rev().zip(u.iter().rev()).take_while(|(x, y)| x == y).count();
        let (vague, precise) = e.slots.substitution(e.ambiguity_type).unwrap();
        let span_a = e.slots.ambiguous_span;
        let span_u = e.slots.unambiguous_span;
        assert!(
            prefix >= span_a.start && prefix >= span_u.start,
            "{}: edit before span",
            e.id
        );
        assert!(
            a.len() - suffix <= span_a.end && u.len() - suffix <= span_u.end,
            "{}: edit after span",
            e.id
        );
        assert_eq!(&e.ambiguous[span_a.start..span_a.end], vague);
        assert_eq!(&e.unambiguous[span_u.start..span_u.end], precise);

        // category fidelity: the substituted slot matches the declared type
        let s = &e.slots;
        let active = match e.ambiguity_type {
            AmbiguityType::Numerical => s.quantity_vague.is_some(),
            AmbiguityType::AttributeNoun => s.noun_substitute.is_some(),
            AmbiguityType::AttributeColor => s.color_substitute.is_some(),
            AmbiguityType::Spatial => s.preposition_vague.is_some(),
        };
        assert!(active, "{}: slot does not match type", e.id);

        // landmark distinctness
        assert!(
            !(s.landmark_noun == s.object_noun && s.landmark_color == s.object_color),
            "{}: landmark is the object",
            e.id
        );
    }
    assert_eq!(by_category[&Category::Numerical], 20);
    assert_eq!(by_category[&Category::Attribute], 20);
    assert_eq!(by_category[&Category::Spatial], 20);
}

fn protocol_traces() {
    let data = dataset(7, 20);
    let follower = |text: &str| vec![ScriptRule::respond([text]).role(Role::Follower).cycling()];

    let agree = scripted_engine(leader_and_followers(follower(AGREE)), 5);
    let disagree = scripted_engine(leader_and_followers(follower(DISAGREE)), 5);
    let mixed = scripted_engine(
        vec![
            ScriptRule::respond([question("How many blocks?")])
                .role(Role::Leader)
                .round(1)
                .cycling(),
            ScriptRule::respond([question("How many red blocks exactly?")])
                .role(Role::Leader)
                .round(2)
                .cycling(),
            ScriptRule::respond([DISAGREE]).role(Role::Follower).round(1).cycling(),
            ScriptRule::respond([AGREE]).role(Role::Follower).round(2).cycling(),
        ],
        5,
    );
    for e in &data {
        for leader in ROSTER {
            let t = agree.run_debate(e, leader).unwrap();
            t.check_invariants(5).unwrap();
            assert!(
                matches!(t.outcome, DebateOutcome::Consensus { at_round: 1, .. }),
                "{:?}",
                t.outcome
            );

            let t = disagree.run_debate(e, leader).unwrap();
            t.check_invariants(5).unwrap();
            assert!(matches!(t.outcome, DebateOutcome::NonConsensus { final_round: 5, .. }));
            assert_eq!(t.rounds.len(), 5);

            let t = mixed.run_debate(e, leader).unwrap();
            t.check_invariants(5).unwrap();
            match &t.outcome {
                DebateOutcome::Consensus {
                    final_proposal,
                    at_round,
                } => {
                    assert_eq!(*at_round, 2);
                    assert_eq!(*final_proposal, t.rounds[1].leader_proposal);
                    assert_eq!(
                        final_proposal.verdict,
                        Verdict::ClarifyingQuestion("How many red blocks exactly?".into())
                    );
                }
                other => panic!("mixed trace ended {other:?}"),
            }
        }
    }
}

fn stochastic_engine(policy: StochasticPolicy, max_rounds: u32) -> Engine {
    let policy = Arc::new(policy);
    let mut pool = AgentPool::new();
    for m in ROSTER {
        let backend: Arc<dyn Backend> = Arc::new(StochasticBackend::new(m, policy.clone()).unwrap());
        pool.insert(Agent::new(AgentConfig::new(m), backend));
    }
    let mut config = DebateConfig::new(roster());
    config.max_rounds = max_rounds;
    config.timing = TimingMode::Simulated;
    Engine::new(config, pool, TemplateSet::default()).unwrap()
}

fn rotation() {
    let data = dataset(5, 20);
    let engine = stochastic_engine(StochasticPolicy::uniform(0.6, 0.7, 0.4, 5), 5);
    let mut sink = MemorySink::default();
    let summary = engine.run_experiment(&data, &mut sink, 4, None).unwrap();
    assert_eq!(summary.entries, 60);
    assert_eq!(sink.transcripts.len(), 180);
    assert_eq!(sink.baselines.len(), 180);
    let mut led: BTreeMap<&str, usize> = BTreeMap::new();
    let mut pairs = HashSet::new();
    for t in &sink.transcripts {
        *led.entry(t.leader_model.as_str()).or_default() += 1;
        assert!(pairs.insert((t.entry_id.clone(), t.leader_model.clone())));
        t.check_invariants(5).unwrap();
    }
    assert_eq!(led.len(), 3);
    assert!(led.values().all(|n| *n == 60), "{led:?}");
    let baseline_pairs: HashSet<_> = sink.baselines.iter().map(|b| (&b.entry_id, &b.model)).collect();
    assert_eq!(baseline_pairs.len(), 180);
}

/// `k/n` as a percentage rounded half-up to one decimal, in integers.
fn tenths(k: u64, n: u64) -> u64 {
    (2000 * k + n) / (2 * n)
}

fn metric_fixture() {
    let started = Instant::now();
    // integer oracle: each reported rate is k/60 for exactly the given k
    let reported = [(48, 800), (8, 133), (17, 283), (46, 767), (24, 400), (29, 483)];
    for (k, t) in reported {
        assert_eq!(tenths(k, 60), t, "{k}/60");
    }
    assert_eq!(tenths(1, 60), 17);
    assert_eq!(tenths(38, 59), 644);

    let data = dataset(3, 20);
    let single = [("alpha", 48), ("beta", 8), ("gamma", 17)];
    let debate = [("alpha", 46), ("beta", 24), ("gamma", 29)];
    let mut baselines = Vec::new();
    for (model, k) in single {
        for (i, e) in data.iter().enumerate() {
            baselines.push(baseline(e, model, i < k));
        }
    }
    let mut transcripts = Vec::new();
    for (model, k) in debate {
        for (i, e) in data.iter().enumerate() {
            let t = match model {
                // one non-consensus debate, which fails
                "alpha" if i == 59 => nonconsensus_transcript(e, model, 5, 10.0),
                // 59 consensus debates, 38 of them settled in round 2
                "beta" if i == 59 => nonconsensus_transcript(e, model, 5, 10.0),
                "beta" => consensus_transcript(e, model, if i < 38 { 2 } else { 1 }, i < k, 10.0),
                _ => consensus_transcript(e, model, 1, i < k, 10.0),
            };
            transcripts.push(t);
        }
    }
    let options = ReportOptions {
        roster: roster(),
        ..ReportOptions::default()
    };
    let report = compute_report(&baselines, &transcripts, &data, &options, &TermTable::default()).unwrap();

    let expect = [
        ("Single(alpha)", 80.0),
        ("Single(beta)", 13.3),
        ("Single(gamma)", 28.3),
        ("Debate(alpha)", 76.7),
        ("Debate(beta)", 40.0),
        ("Debate(gamma)", 48.3),
    ];
    for (name, pct) in expect {
        let got = report.config(name).unwrap().overall.rate_pct;
        assert!((got - pct).abs() <= 0.05, "{name}: {got} vs {pct}");
    }
    let alpha = report.leader("alpha").unwrap();
    assert!(
        (alpha.non_consensus_rate_pct - 1.7).abs() <= 0.05,
        "{}",
        alpha.non_consensus_rate_pct
    );
    let beta = report.leader("beta").unwrap();
    assert_eq!(beta.consensus, 59);
    let round2 = 100.0 * beta.rounds_histogram[1] as f64 / beta.consensus as f64;
    assert!((round2 - 64.4).abs() <= 0.05, "{round2}");

    let dir = tempfile::tempdir().unwrap();
    emit_reports(&report, dir.path()).unwrap();
    let fig2 = std::fs::read_to_string(dir.path().join("fig2_overall.csv")).unwrap();
    for row in [
        "Single(alpha),48,60,80.0",
        "Single(beta),8,60,13.3",
        "Debate(alpha),46,60,76.7",
        "Debate(gamma),29,60,48.3",
    ] {
        assert!(fig2.contains(row), "{fig2}");
    }
    let fig6 = std::fs::read_to_string(dir.path().join("fig6_rounds_to_consensus.csv")).unwrap();
    assert!(fig6.contains("beta,2,38,64.4\n"), "{fig6}");
    let fig7 = std::fs::read_to_string(dir.path().join("fig7_nonconsensus.csv")).unwrap();
    assert!(fig7.contains("alpha,60,1,0,1.7\n"), "{fig7}");
    assert!(started.elapsed() < Duration::from_secs(1), "{:?}", started.elapsed());
}

/// Consensus count, successes and summed consensus rounds reproducing one
/// table row when formatted to one decimal over `n` debates.
fn row_counts(n: usize, reach: &str, avg: &str, success: &str) -> Option<(usize, usize, usize)> {
    let f = |x: f64| format!("{x:.1}");
    let c = (1..=n).find(|c| f(100.0 * *c as f64 / n as f64) == reach)?;
    let s = (0..=c).find(|s| f(100.0 * *s as f64 / c as f64) == success)?;
    let r = (c..=5 * c).find(|r| f(*r as f64 / c as f64) == avg)?;
    Some((c, s, r))
}

fn table_emission() {
    let rows = [
        ("alpha", "85.0", "1.8", "92.0"),
        ("beta", "82.0", "2.1", "88.0"),
        ("gamma", "90.0", "1.5", "95.0"),
    ];
    let times = [("alpha", 25.3), ("beta", 28.1), ("gamma", 22.5)];
    // smallest dataset size at which all three rows are representable
    let (n, counts) = (1..2000)
        .find_map(|n| {
            let counts: Option<Vec<_>> = rows.iter().map(|(_, a, b, c)| row_counts(n, a, b, c)).collect();
            counts.map(|c| (n, c))
        })
        .expect("a representable dataset size exists");

    let data = synthetic_entries(n);
    let mut transcripts: Vec<DebateTranscript> = Vec::new();
    for (((model, ..), (c, s, r)), (_, time)) in rows.iter().zip(&counts).zip(times) {
        // spread r rounds over c consensus debates, each between 1 and 5
        let mut rounds = vec![1u32; *c];
        let mut extra = r - c;
        for slot in rounds.iter_mut() {
            let add = extra.min(4);
            *slot += add as u32;
            extra -= add;
        }
        assert_eq!(extra, 0);
        for (i, e) in data.iter().enumerate() {
            let t = if i < *c {
                consensus_transcript(e, model, rounds[i], i < *s, time)
            } else {
                nonconsensus_transcript(e, model, 5, time)
            };
            transcripts.push(t);
        }
    }
    let options = ReportOptions {
        roster: roster(),
        ..ReportOptions::default()
    };
    let report = compute_report(&[], &transcripts, &data, &options, &TermTable::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&report, dir.path()).unwrap();
    let table1 = std::fs::read(dir.path().join("table1_leader_effectiveness.csv")).unwrap();
    assert_eq!(
        String::from_utf8(table1).unwrap(),
        "leader,consensus_reach_pct,avg_rounds,success_pct\n\
         alpha,85.0,1.8,92.0\nbeta,82.0,2.1,88.0\ngamma,90.0,1.5,95.0\n"
    );
    let table2 = std::fs::read(dir.path().join("table2_debate_time.csv")).unwrap();
    assert_eq!(
        String::from_utf8(table2).unwrap(),
        "leader,avg_debate_time_s\nalpha,25.3\nbeta,28.1\ngamma,22.5\n"
    );
}

fn monte_carlo() {
    let started = Instant::now();
    let p: f64 = 0.7;
    // exact oracle: enumerate both followers' stances
    let mut exact = 0.0;
    for a in [Stance::Agree, Stance::Disagree] {
        for b in [Stance::Agree, Stance::Disagree] {
            let pr = |s: Stance| if s == Stance::Agree { p } else { 1.0 - p };
            let fb = |s: Stance| FollowerFeedback {
                stance: s,
                reasoning: String::new(),
                alternative_question: None,
            };
            if consensus(&[fb(a), fb(b)]) {
                exact += pr(a) * pr(b);
            }
        }
    }
    assert!((exact - p * p).abs() < 1e-12, "{exact}");

    let engine = stochastic_engine(StochasticPolicy::uniform(0.5, p, p, 99), 5);
    let data = synthetic_entries(3334);
    let mut sink = MemorySink::default();
    engine.run_experiment(&data, &mut sink, 8, None).unwrap();
    let debates = sink.transcripts.len();
    assert!(debates >= 10_000, "{debates}");
    let round_one = sink
        .transcripts
        .iter()
        .filter(|t| matches!(t.outcome, DebateOutcome::Consensus { at_round: 1, .. }))
        .count();
    let fraction = round_one as f64 / debates as f64;
    println!("    round-1 consensus {round_one}/{debates} = {fraction:.4} (expected {exact:.2})");
    assert!((fraction - exact).abs() <= 0.02, "{fraction}");
    assert!(started.elapsed() < Duration::from_secs(30), "{:?}", started.elapsed());
}

fn http_fidelity() {
    let bodies = [question("How many blocks?"), AGREE.to_string(), DISAGREE.to_string()];
    let server = MockServer::start(move |n| (200, chat_body(&bodies[n % 3])));
    let backend: Arc<dyn Backend> = Arc::new(HttpBackend::new(server.url.clone(), None, Duration::from_secs(5)));
    let engine = engine_with(backend, 5);
    let data = dataset(8, 1);
    for e in &data {
        engine.run_baseline(e, "alpha").unwrap();
        engine.run_debate(e, "beta").unwrap();
    }
    let requests = server.completions();
    assert!(requests.len() >= 6);
    for r in &requests {
        let body: Value = serde_json::from_str(&r.body).unwrap();
        assert_eq!(body["temperature"], 0.5, "{}", r.body);
        assert_eq!(body["max_tokens"], 350, "{}", r.body);
    }

    // parse-failure injection: one regeneration, then an error outcome
    let bad = MockServer::start(|_| (200, chat_body("Sure, happy to help with that.")));
    let backend: Arc<dyn Backend> = Arc::new(HttpBackend::new(bad.url.clone(), None, Duration::from_secs(5)));
    let engine = engine_with(backend, 5);
    let t = engine.run_debate(&data[0], "gamma").unwrap();
    match &t.outcome {
        DebateOutcome::Error { stage, cause } => {
            assert_eq!(stage.role, Role::Leader);
            assert!(matches!(cause, CallFailure::Parse(_)));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(bad.completions().len(), 2);
    for r in bad.completions() {
        let body: Value = serde_json::from_str(&r.body).unwrap();
        assert_eq!(body["temperature"], 0.5);
        assert_eq!(body["max_tokens"], 350);
    }
}

const SCRIPT: &str = r#"{
  "latency_s": 0.75,
  "rules": [
    {"role": "baseline", "responses": ["REASONING: The count is vague.\nVERDICT: QUESTION: How many blocks?"], "cycle": true},
    {"role": "leader", "responses": ["REASONING: Something is vague.\nVERDICT: QUESTION: Which one?"], "cycle": true},
    {"role": "follower", "round": 1, "slot": 0, "responses": ["STANCE: DISAGREE\nREASONING: Too broad.\nALT_QUESTION: NONE"], "cycle": true},
    {"role": "follower", "responses": ["STANCE: AGREE\nREASONING: Fine.\nALT_QUESTION: NONE"], "cycle": true}
  ]
}"#;

fn pipeline(dir: &Path) {
    let bin = env!("CARGO_BIN_EXE_ambidebate");
    let run = |args: &[&str]| {
        let o = Command::new(bin).args(args).env("RUST_LOG", "error").output().unwrap();
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    };
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("script.json"), SCRIPT).unwrap();
    let agents: String = ROSTER
        .iter()
        .map(|m| {
            format!("[[agents]]\nmodel = \"{m}\"\nbackend = {{ kind = \"scripted\", script = \"script.json\" }}\n\n")
        })
        .collect();
    std::fs::write(
        dir.join("run.toml"),
        format!("dataset = \"dataset.json\"\noutput_dir = \"run\"\nseed = 17\nparallelism = 4\ntiming = \"simulated\"\n\n{agents}"),
    )
    .unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    run(&[
        "generate",
        "--seed",
        "17",
        "--per-type",
        "20",
        "--out",
        &s(&dir.join("dataset.json")),
    ]);
    run(&["run", "--config", &s(&dir.join("run.toml"))]);
    run(&["report", "--run-dir", &s(&dir.join("run"))]);
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&a);
    pipeline(&b);
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.len() >= 16, "{:?}", fa.keys().collect::<Vec<_>>());
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs between runs");
    }
    let entries: Vec<InstructionEntry> = serde_json::from_slice(&fa["run/dataset.json"]).unwrap();
    assert_eq!(entries.len(), 60);
}
