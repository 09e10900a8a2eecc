use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use super::{BaselineRecord, DebateOutcome, DebateTranscript, Engine, EngineError};
use crate::dataset::InstructionEntry;

pub const BASELINES_FILE: &str = "baselines.jsonl";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";

/// Receives finished records in deterministic order.
pub trait RecordSink {
    fn baseline(&mut self, record: &BaselineRecord) -> io::Result<()>;
    fn transcript(&mut self, transcript: &DebateTranscript) -> io::Result<()>;
}

/// Appends one JSON object per line, flushing after each record so an
/// interrupted run leaves every completed record on disk.
pub struct JsonlSink {
    baselines: BufWriter<File>,
    transcripts: BufWriter<File>,
}

impl JsonlSink {
    pub fn create(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            baselines: BufWriter::new(File::create(dir.join(BASELINES_FILE))?),
            transcripts: BufWriter::new(File::create(dir.join(TRANSCRIPTS_FILE))?),
        })
    }
}

fn write_line<T: Serialize>(out: &mut BufWriter<File>, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    out.flush()
}

impl RecordSink for JsonlSink {
    fn baseline(&mut self, record: &BaselineRecord) -> io::Result<()> {
        write_line(&mut self.baselines, record)
    }

    fn transcript(&mut self, transcript: &DebateTranscript) -> io::Result<()> {
        write_line(&mut self.transcripts, transcript)
    }
}

#[derive(Debug, Default)]
pub struct MemorySink {
    pub baselines: Vec<BaselineRecord>,
    pub transcripts: Vec<DebateTranscript>,
}

impl RecordSink for MemorySink {
    fn baseline(&mut self, record: &BaselineRecord) -> io::Result<()> {
        self.baselines.push(record.clone());
        Ok(())
    }

    fn transcript(&mut self, transcript: &DebateTranscript) -> io::Result<()> {
        self.transcripts.push(transcript.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub entries: usize,
    pub baselines: usize,
    pub baseline_errors: usize,
    pub debates: usize,
    pub consensus: usize,
    pub non_consensus: usize,
    pub debate_errors: usize,
    /// True when the run stopped early on request.
    pub cancelled: bool,
}

enum Job<'a> {
    Baseline(&'a InstructionEntry, &'a str),
    Debate(&'a InstructionEntry, &'a str),
}

enum Record {
    Baseline(BaselineRecord),
    Debate(DebateTranscript),
}

impl RunSummary {
    fn absorb(&mut self, record: &Record) {
        match record {
            Record::Baseline(b) => {
                self.baselines += 1;
                if b.error.is_some() {
                    self.baseline_errors += 1;
                }
            }
            Record::Debate(t) => {
                self.debates += 1;
                match t.outcome {
                    DebateOutcome::Consensus { .. } => self.consensus += 1,
                    DebateOutcome::NonConsensus { .. } => self.non_consensus += 1,
                    DebateOutcome::Error { .. } => self.debate_errors += 1,
                }
            }
        }
    }
}

impl Engine {
    /// Runs every baseline and every leader rotation over `dataset`.
    ///
    /// Work is spread over `parallelism` threads but records reach `sink` in
    /// dataset order: for each entry, the roster's baselines and then its
    /// debates, both in roster order. Setting `cancel` stops new work from
    /// starting; records already in flight are still written.
    pub fn run_experiment(
        &self,
        dataset: &[InstructionEntry],
        sink: &mut dyn RecordSink,
        parallelism: usize,
        cancel: Option<&AtomicBool>,
    ) -> Result<RunSummary, EngineError> {
        if dataset.is_empty() {
            return Err(EngineError::EmptyDataset);
        }
        let roster = &self.config().roster;
        let mut jobs = Vec::with_capacity(dataset.len() * roster.len() * 2);
        for entry in dataset {
            jobs.extend(roster.iter().map(|m| Job::Baseline(entry, m)));
            jobs.extend(roster.iter().map(|m| Job::Debate(entry, m)));
        }
        let per_entry = roster.len() * 2;
        let workers = parallelism.clamp(1, jobs.len());
        let next = AtomicUsize::new(0);
        let stopped = || cancel.is_some_and(|c| c.load(Ordering::SeqCst));

        let mut summary = RunSummary::default();
        std::thread::scope(|s| -> Result<(), EngineError> {
            let (tx, rx) = mpsc::channel::<(usize, Result<Record, EngineError>)>();
            for _ in 0..workers {
                let tx = tx.clone();
                let (jobs, next) = (&jobs, &next);
                s.spawn(move || loop {
                    if stopped() {
                        break;
                    }
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    let Some(job) = jobs.get(k) else { break };
                    let record = match job {
                        Job::Baseline(e, m) => self.run_baseline(e, m).map(Record::Baseline),
                        Job::Debate(e, m) => self.run_debate(e, m).map(Record::Debate),
                    };
                    if tx.send((k, record)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);

            let mut pending = BTreeMap::new();
            let mut written = 0;
            for (k, record) in rx {
                pending.insert(k, record?);
                while let Some(record) = pending.remove(&written) {
                    match &record {
                        Record::Baseline(b) => sink.baseline(b)?,
                        Record::Debate(t) => sink.transcript(t)?,
                    }
                    summary.absorb(&record);
                    written += 1;
                    if written % per_entry == 0 {
                        info!(done = written / per_entry, total = dataset.len(), "entry complete");
                    }
                }
            }
            summary.entries = written / per_entry;
            Ok(())
        })?;
        summary.cancelled = stopped() && summary.entries < dataset.len();
        if summary.cancelled {
            warn!(entries = summary.entries, "run cancelled");
        }
        Ok(summary)
    }
}
