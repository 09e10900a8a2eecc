mod common;

use ambidebate::agent::Proposal;
use ambidebate::dataset::{AmbiguityType, Category, InstructionEntry};
use ambidebate::engine::{
    BaselineRecord, DebateOutcome, DebateTranscript, ErrorStage, BASELINES_FILE, TRANSCRIPTS_FILE,
};
use ambidebate::eval::{
    compute_report, emit_reports, read_baselines, read_transcripts, EvalError, JudgeMode, MetricsReport, ReportOptions,
    TermTable, REPORT_FILES,
};
use common::*;
use proptest::prelude::*;

fn options(mode: JudgeMode) -> ReportOptions {
    ReportOptions {
        mode,
        roster: roster(),
        ..ReportOptions::default()
    }
}

fn report(b: &[BaselineRecord], t: &[DebateTranscript], d: &[InstructionEntry], o: &ReportOptions) -> MetricsReport {
    compute_report(b, t, d, o, &TermTable::default()).unwrap()
}

fn error_transcript(entry: &InstructionEntry, leader: &str) -> DebateTranscript {
    let mut t = consensus_transcript(entry, leader, 1, false, 1.0);
    t.rounds.clear();
    t.outcome = DebateOutcome::Error {
        stage: ErrorStage {
            role: ambidebate::agent::Role::Leader,
            model: leader.into(),
            round: 1,
            slot: None,
        },
        cause: ambidebate::engine::CallFailure::Parse("x".into()),
    };
    t
}

#[test]
fn missing_records_count_as_failures() {
    let data = dataset(1, 2);
    let baselines = vec![baseline(&data[0], "alpha", true)];
    let r = report(&baselines, &[], &data, &options(JudgeMode::Strict));
    let single = r.config("Single(alpha)").unwrap();
    assert_eq!(single.overall.successes, 1);
    assert_eq!(single.overall.total, 6);
    assert_eq!(r.config("Single(beta)").unwrap().overall.total, 6);
    assert_eq!(r.configurations.len(), 6);
}

#[test]
fn unknown_entry_is_a_key_mismatch() {
    let data = dataset(1, 1);
    let mut b = baseline(&data[0], "alpha", true);
    b.entry_id = "nope".into();
    let err = compute_report(&[b], &[], &data, &options(JudgeMode::Strict), &TermTable::default()).unwrap_err();
    assert!(matches!(err, EvalError::KeyMismatch { .. }), "{err}");
}

#[test]
fn duplicate_records_are_rejected() {
    let data = dataset(1, 1);
    let t = consensus_transcript(&data[0], "alpha", 1, true, 1.0);
    let err = compute_report(
        &[],
        &[t.clone(), t],
        &data,
        &options(JudgeMode::Strict),
        &TermTable::default(),
    )
    .unwrap_err();
    assert!(matches!(err, EvalError::DuplicateRecord { .. }), "{err}");
}

#[test]
fn consensus_round_beyond_cap_is_rejected() {
    let data = dataset(1, 1);
    let t = consensus_transcript(&data[0], "alpha", 6, true, 1.0);
    let err = compute_report(&[], &[t], &data, &options(JudgeMode::Strict), &TermTable::default()).unwrap_err();
    assert!(matches!(err, EvalError::InvalidRecord { .. }), "{err}");
}

#[test]
fn nonconsensus_policy_switch() {
    let data = dataset(1, 1);
    let t = vec![nonconsensus_transcript(&data[0], "alpha", 5, 1.0)];
    let failing = report(&[], &t, &data, &options(JudgeMode::Strict));
    assert_eq!(failing.config("Debate(alpha)").unwrap().overall.successes, 0);
    let judged = report(
        &[],
        &t,
        &data,
        &ReportOptions {
            nonconsensus_as_failure: false,
            ..options(JudgeMode::Strict)
        },
    );
    assert_eq!(judged.config("Debate(alpha)").unwrap().overall.successes, 1);
}

#[test]
fn errors_always_fail_and_are_counted() {
    let data = dataset(1, 1);
    let t = vec![error_transcript(&data[0], "beta")];
    let r = report(&[], &t, &data, &options(JudgeMode::Lenient));
    let l = r.leader("beta").unwrap();
    assert_eq!((l.debates, l.errors, l.consensus, l.non_consensus), (1, 1, 0, 0));
    assert_eq!(r.config("Debate(beta)").unwrap().overall.successes, 0);
}

#[test]
fn emitted_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(2, 2);
    let mut baselines = Vec::new();
    let mut transcripts = Vec::new();
    for (i, e) in data.iter().enumerate() {
        for m in ROSTER {
            baselines.push(baseline(e, m, i % 2 == 0));
            transcripts.push(consensus_transcript(e, m, 1 + (i as u32 % 3), i % 3 != 0, 10.0));
        }
    }
    let write = |name: &str, lines: Vec<String>| {
        std::fs::write(dir.path().join(name), lines.join("\n") + "\n").unwrap();
    };
    write(
        BASELINES_FILE,
        baselines.iter().map(|b| serde_json::to_string(b).unwrap()).collect(),
    );
    write(
        TRANSCRIPTS_FILE,
        transcripts.iter().map(|t| serde_json::to_string(t).unwrap()).collect(),
    );
    assert_eq!(read_baselines(&dir.path().join(BASELINES_FILE)).unwrap(), baselines);
    assert_eq!(
        read_transcripts(&dir.path().join(TRANSCRIPTS_FILE)).unwrap(),
        transcripts
    );

    let r = report(&baselines, &transcripts, &data, &options(JudgeMode::Strict));
    let out = dir.path().join("report");
    let written = emit_reports(&r, &out).unwrap();
    assert_eq!(written.len(), REPORT_FILES.len() + 1);
    for name in REPORT_FILES {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        assert!(text.ends_with('\n') && !text.contains('\r'), "{name}");
    }
    let fig2 = std::fs::read_to_string(out.join("fig2_overall.csv")).unwrap();
    assert_eq!(
        fig2,
        "configuration,successes,total,success_rate_pct\n\
         Single(alpha),3,6,50.0\nSingle(beta),3,6,50.0\nSingle(gamma),3,6,50.0\n\
         Debate(alpha),4,6,66.7\nDebate(beta),4,6,66.7\nDebate(gamma),4,6,66.7\n"
    );
    let table2 = std::fs::read_to_string(out.join("table2_debate_time.csv")).unwrap();
    assert_eq!(table2, "leader,avg_debate_time_s\nalpha,10.0\nbeta,10.0\ngamma,10.0\n");
    let json: MetricsReport = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json, r);
}

#[test]
fn corrupted_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(2, 1);
    let good = serde_json::to_string(&baseline(&data[0], "alpha", true)).unwrap();
    let path = dir.path().join(BASELINES_FILE);
    std::fs::write(&path, format!("{good}\n{good}\n{{\"entry_id\": 3\n")).unwrap();
    match read_baselines(&path).unwrap_err() {
        EvalError::Schema { line, .. } => assert_eq!(line, 3),
        other => panic!("unexpected {other}"),
    }
}

fn arb_proposal(kind: u8, entry: &InstructionEntry) -> Option<Proposal> {
    match kind {
        0 => None,
        1 => Some(Proposal::clear("r")),
        2 => Some(proposal_for(entry, true)),
        _ => Some(Proposal::question("r", "Could you say more about that?")),
    }
}

#[derive(Debug, Clone)]
struct Plan {
    baseline: Vec<[u8; 3]>,
    outcome: Vec<[(u8, u8, u32); 3]>,
}

fn arb_plan(n: usize) -> impl Strategy<Value = Plan> {
    (
        prop::collection::vec(prop::array::uniform3(0u8..4), n),
        prop::collection::vec(prop::array::uniform3((0u8..3, 0u8..4, 1u32..=5)), n),
    )
        .prop_map(|(baseline, outcome)| Plan { baseline, outcome })
}

fn build(plan: &Plan, data: &[InstructionEntry]) -> (Vec<BaselineRecord>, Vec<DebateTranscript>) {
    let mut baselines = Vec::new();
    let mut transcripts = Vec::new();
    for (i, e) in data.iter().enumerate() {
        for (k, m) in ROSTER.iter().enumerate() {
            let mut b = baseline(e, m, false);
            b.proposal = arb_proposal(plan.baseline[i][k], e);
            baselines.push(b);
            let (shape, prop_kind, round) = plan.outcome[i][k];
            let mut t = match shape {
                0 => consensus_transcript(e, m, round, false, round as f64),
                1 => nonconsensus_transcript(e, m, 5, 5.0),
                _ => error_transcript(e, m),
            };
            let p = arb_proposal(prop_kind, e).unwrap_or_else(|| Proposal::clear("r"));
            match &mut t.outcome {
                DebateOutcome::Consensus { final_proposal, .. }
                | DebateOutcome::NonConsensus { final_proposal, .. } => {
                    *final_proposal = p.clone();
                    for r in &mut t.rounds {
                        r.leader_proposal = p.clone();
                    }
                }
                DebateOutcome::Error { .. } => {}
            }
            transcripts.push(t);
        }
    }
    (baselines, transcripts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_accounting_holds(plan in arb_plan(12)) {
        let data = dataset(3, 4);
        let (b, t) = build(&plan, &data);
        let strict = report(&b, &t, &data, &options(JudgeMode::Strict));
        let lenient = report(&b, &t, &data, &options(JudgeMode::Lenient));

        for r in [&strict, &lenient] {
            for c in &r.configurations {
                let by_type: usize = c.by_type.values().map(|x| x.successes).sum();
                let by_cat: usize = c.by_category.values().map(|x| x.successes).sum();
                prop_assert_eq!(by_type, c.overall.successes);
                prop_assert_eq!(by_cat, c.overall.successes);
                prop_assert_eq!(c.overall.total, data.len());
                let attr = &c.by_category[&Category::Attribute];
                prop_assert_eq!(
                    attr.successes,
                    c.by_type[&AmbiguityType::AttributeNoun].successes + c.by_type[&AmbiguityType::AttributeColor].successes
                );
                prop_assert!(c.overall.rate_pct >= 0.0 && c.overall.rate_pct <= 100.0);
            }
            for l in &r.leaders {
                prop_assert_eq!(l.consensus + l.non_consensus + l.errors, l.debates);
                prop_assert_eq!(l.debates, data.len());
                prop_assert_eq!(l.rounds_histogram.iter().sum::<usize>(), l.consensus);
                prop_assert!(l.consensus_successes <= l.consensus);
                let debate = r.config(&format!("Debate({})", l.leader)).unwrap();
                // with non-consensus failing, debate successes are consensus successes
                prop_assert_eq!(debate.overall.successes, l.consensus_successes);
            }
        }
        for (s, l) in strict.configurations.iter().zip(&lenient.configurations) {
            prop_assert!(l.overall.successes >= s.overall.successes, "{}", s.name);
        }

        let judged = report(&b, &t, &data, &ReportOptions { nonconsensus_as_failure: false, ..options(JudgeMode::Strict) });
        for (s, j) in strict.configurations.iter().zip(&judged.configurations) {
            prop_assert!(j.overall.successes >= s.overall.successes);
        }
    }
}
