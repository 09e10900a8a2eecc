use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{EvalError, JudgeMode, TermTable};
use crate::dataset::{AmbiguityType, Category, InstructionEntry};
use crate::engine::{BaselineRecord, DebateOutcome, DebateTranscript, DEFAULT_MAX_ROUNDS};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub mode: JudgeMode,
    /// Count non-consensus debates as failures regardless of their last proposal.
    pub nonconsensus_as_failure: bool,
    pub max_rounds: u32,
    /// Model order for every table. Empty means order of first appearance.
    pub roster: Vec<String>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            mode: JudgeMode::Strict,
            nonconsensus_as_failure: true,
            max_rounds: DEFAULT_MAX_ROUNDS,
            roster: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub successes: usize,
    pub total: usize,
    pub rate_pct: f64,
}

impl Rate {
    pub fn new(successes: usize, total: usize) -> Self {
        Self {
            successes,
            total,
            rate_pct: pct(successes, total),
        }
    }
}

pub(crate) fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigKind {
    Single,
    Debate,
}

/// Success rates of one configuration: a model alone, or debates it leads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigMetrics {
    pub name: String,
    pub kind: ConfigKind,
    pub model: String,
    pub overall: Rate,
    pub by_type: BTreeMap<AmbiguityType, Rate>,
    pub by_category: BTreeMap<Category, Rate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderMetrics {
    pub leader: String,
    pub debates: usize,
    pub consensus: usize,
    pub non_consensus: usize,
    pub errors: usize,
    pub non_consensus_rate_pct: f64,
    /// Consensus count per round, index 0 being round 1.
    pub rounds_histogram: Vec<usize>,
    pub consensus_reach_pct: f64,
    /// Mean consensus round over consensus debates only.
    pub avg_rounds: f64,
    pub consensus_successes: usize,
    pub consensus_success_pct: f64,
    pub avg_debate_time_s: f64,
    /// Rounds whose leader proposal repeats the previous round's verbatim.
    pub repeated_proposals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLatency {
    pub model: String,
    pub calls: usize,
    pub avg_latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub mode: JudgeMode,
    pub nonconsensus_as_failure: bool,
    pub max_rounds: u32,
    pub entries: usize,
    pub entries_by_type: BTreeMap<AmbiguityType, usize>,
    pub configurations: Vec<ConfigMetrics>,
    pub leaders: Vec<LeaderMetrics>,
    pub baseline_latency: Vec<ModelLatency>,
}

impl MetricsReport {
    pub fn config(&self, name: &str) -> Option<&ConfigMetrics> {
        self.configurations.iter().find(|c| c.name == name)
    }

    pub fn leader(&self, model: &str) -> Option<&LeaderMetrics> {
        self.leaders.iter().find(|l| l.leader == model)
    }
}

pub fn config_name(kind: ConfigKind, model: &str) -> String {
    match kind {
        ConfigKind::Single => format!("Single({model})"),
        ConfigKind::Debate => format!("Debate({model})"),
    }
}

fn push_unique(order: &mut Vec<String>, model: &str) {
    if !order.iter().any(|m| m == model) {
        order.push(model.to_string());
    }
}

struct Tally {
    successes: BTreeMap<AmbiguityType, usize>,
}

impl Tally {
    fn new() -> Self {
        Self {
            successes: BTreeMap::new(),
        }
    }

    fn hit(&mut self, kind: AmbiguityType) {
        *self.successes.entry(kind).or_default() += 1;
    }

    fn finish(
        &self,
        kind: ConfigKind,
        model: &str,
        totals: &BTreeMap<AmbiguityType, usize>,
        entries: usize,
    ) -> ConfigMetrics {
        let count = |t: AmbiguityType| self.successes.get(&t).copied().unwrap_or(0);
        let total = |t: AmbiguityType| totals.get(&t).copied().unwrap_or(0);
        let by_type = AmbiguityType::ALL
            .into_iter()
            .map(|t| (t, Rate::new(count(t), total(t))))
            .collect();
        let by_category = Category::ALL
            .into_iter()
            .map(|c| {
                let members = AmbiguityType::ALL.into_iter().filter(|t| t.category() == c);
                let (s, n) = members.fold((0, 0), |(s, n), t| (s + count(t), n + total(t)));
                (c, Rate::new(s, n))
            })
            .collect();
        let all: usize = self.successes.values().sum();
        ConfigMetrics {
            name: config_name(kind, model),
            kind,
            model: model.to_string(),
            overall: Rate::new(all, entries),
            by_type,
            by_category,
        }
    }
}

/// Aggregates baseline records and debate transcripts over `dataset`.
///
/// Every rate uses the dataset size (or the per-type count) as denominator,
/// so a missing record counts as a failure. Debate errors always fail.
pub fn compute_report(
    baselines: &[BaselineRecord],
    transcripts: &[DebateTranscript],
    dataset: &[InstructionEntry],
    options: &ReportOptions,
    table: &TermTable,
) -> Result<MetricsReport, EvalError> {
    let by_id: HashMap<&str, &InstructionEntry> = dataset.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut totals: BTreeMap<AmbiguityType, usize> = AmbiguityType::ALL.into_iter().map(|t| (t, 0)).collect();
    for e in dataset {
        *totals.entry(e.ambiguity_type).or_default() += 1;
    }

    let mut roster = options.roster.clone();
    for b in baselines {
        push_unique(&mut roster, &b.model);
    }
    for t in transcripts {
        push_unique(&mut roster, &t.leader_model);
    }

    let mut single: HashMap<&str, Tally> = roster.iter().map(|m| (m.as_str(), Tally::new())).collect();
    let mut latency: HashMap<&str, (usize, f64)> = HashMap::new();
    let mut seen = std::collections::HashSet::new();
    for b in baselines {
        let entry = *by_id.get(b.entry_id.as_str()).ok_or_else(|| EvalError::KeyMismatch {
            kind: "baseline",
            entry_id: b.entry_id.clone(),
        })?;
        if !seen.insert((b.entry_id.as_str(), b.model.as_str())) {
            return Err(EvalError::DuplicateRecord {
                kind: "baseline",
                entry_id: b.entry_id.clone(),
                model: b.model.clone(),
            });
        }
        if table.judge(b.proposal.as_ref(), entry, options.mode).success {
            single
                .get_mut(b.model.as_str())
                .expect("roster covers baselines")
                .hit(entry.ambiguity_type);
        }
        let slot = latency.entry(b.model.as_str()).or_default();
        slot.0 += 1;
        slot.1 += b.latency_s;
    }

    struct LeaderAcc {
        tally: Tally,
        debates: usize,
        consensus: usize,
        non_consensus: usize,
        errors: usize,
        histogram: Vec<usize>,
        round_sum: usize,
        consensus_successes: usize,
        time_sum: f64,
        repeated: usize,
    }
    let width = options.max_rounds as usize;
    let mut leaders: HashMap<&str, LeaderAcc> = roster
        .iter()
        .map(|m| {
            (
                m.as_str(),
                LeaderAcc {
                    tally: Tally::new(),
                    debates: 0,
                    consensus: 0,
                    non_consensus: 0,
                    errors: 0,
                    histogram: vec![0; width],
                    round_sum: 0,
                    consensus_successes: 0,
                    time_sum: 0.0,
                    repeated: 0,
                },
            )
        })
        .collect();
    let mut seen = std::collections::HashSet::new();
    for t in transcripts {
        let entry = *by_id.get(t.entry_id.as_str()).ok_or_else(|| EvalError::KeyMismatch {
            kind: "transcript",
            entry_id: t.entry_id.clone(),
        })?;
        if !seen.insert((t.entry_id.as_str(), t.leader_model.as_str())) {
            return Err(EvalError::DuplicateRecord {
                kind: "transcript",
                entry_id: t.entry_id.clone(),
                model: t.leader_model.clone(),
            });
        }
        let acc = leaders.get_mut(t.leader_model.as_str()).expect("roster covers leaders");
        acc.debates += 1;
        acc.time_sum += t.timing.wall_time_s;
        acc.repeated += t
            .rounds
            .windows(2)
            .filter(|w| w[0].leader_proposal == w[1].leader_proposal)
            .count();
        let judged = match &t.outcome {
            DebateOutcome::Consensus {
                final_proposal,
                at_round,
            } => {
                acc.consensus += 1;
                acc.round_sum += *at_round as usize;
                let r = *at_round as usize;
                if r == 0 || r > acc.histogram.len() {
                    return Err(EvalError::InvalidRecord {
                        entry_id: t.entry_id.clone(),
                        message: format!("consensus at round {r} outside 1..={}", options.max_rounds),
                    });
                }
                acc.histogram[r - 1] += 1;
                let ok = table.judge(Some(final_proposal), entry, options.mode).success;
                if ok {
                    acc.consensus_successes += 1;
                }
                ok
            }
            DebateOutcome::NonConsensus { final_proposal, .. } => {
                acc.non_consensus += 1;
                !options.nonconsensus_as_failure && table.judge(Some(final_proposal), entry, options.mode).success
            }
            DebateOutcome::Error { .. } => {
                acc.errors += 1;
                false
            }
        };
        if judged {
            acc.tally.hit(entry.ambiguity_type);
        }
    }

    let entries = dataset.len();
    let mut configurations = Vec::new();
    for m in &roster {
        configurations.push(single[m.as_str()].finish(ConfigKind::Single, m, &totals, entries));
    }
    for m in &roster {
        configurations.push(
            leaders[m.as_str()]
                .tally
                .finish(ConfigKind::Debate, m, &totals, entries),
        );
    }
    let leader_rows = roster
        .iter()
        .map(|m| {
            let a = &leaders[m.as_str()];
            LeaderMetrics {
                leader: m.clone(),
                debates: a.debates,
                consensus: a.consensus,
                non_consensus: a.non_consensus,
                errors: a.errors,
                non_consensus_rate_pct: pct(a.non_consensus, a.debates),
                rounds_histogram: a.histogram.clone(),
                consensus_reach_pct: pct(a.consensus, a.debates),
                avg_rounds: if a.consensus == 0 {
                    0.0
                } else {
                    a.round_sum as f64 / a.consensus as f64
                },
                consensus_successes: a.consensus_successes,
                consensus_success_pct: pct(a.consensus_successes, a.consensus),
                avg_debate_time_s: if a.debates == 0 {
                    0.0
                } else {
                    a.time_sum / a.debates as f64
                },
                repeated_proposals: a.repeated,
            }
        })
        .collect();
    let baseline_latency = roster
        .iter()
        .map(|m| {
            let (calls, sum) = latency.get(m.as_str()).copied().unwrap_or_default();
            ModelLatency {
                model: m.clone(),
                calls,
                avg_latency_s: if calls == 0 { 0.0 } else { sum / calls as f64 },
            }
        })
        .collect();

    Ok(MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: options.mode,
        nonconsensus_as_failure: options.nonconsensus_as_failure,
        max_rounds: options.max_rounds,
        entries,
        entries_by_type: totals,
        configurations,
        leaders: leader_rows,
        baseline_latency,
    })
}
