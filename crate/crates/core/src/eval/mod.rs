//! Success judgment, aggregate metrics, and report files.

mod emit;
mod judge;
mod report;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use emit::{emit_reports, read_baselines, read_transcripts, render_table1, render_table2, REPORT_FILES};
pub use judge::{judge_success, TermTable};
pub use report::{
    compute_report, ConfigKind, ConfigMetrics, LeaderMetrics, MetricsReport, ModelLatency, Rate, ReportOptions,
    REPORT_SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{kind} record references unknown entry {entry_id}")]
    KeyMismatch { kind: &'static str, entry_id: String },
    #[error("duplicate {kind} record for entry {entry_id}, model {model}")]
    DuplicateRecord {
        kind: &'static str,
        entry_id: String,
        model: String,
    },
    #[error("record for entry {entry_id}: {message}")]
    InvalidRecord { entry_id: String, message: String },
    #[error("{path} line {line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid term table: {0}")]
    TermTable(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeMode {
    /// Any clarifying question counts.
    Lenient,
    /// The question must mention a term targeting the entry's ambiguity.
    #[default]
    Strict,
}

impl JudgeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            JudgeMode::Lenient => "lenient",
            JudgeMode::Strict => "strict",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessJudgment {
    pub success: bool,
    pub mode: JudgeMode,
    /// Table and slot terms found in the question, in order of appearance.
    pub matched_slot_terms: Vec<String>,
}
