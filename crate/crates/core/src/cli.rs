//! The `ambidebate` command line: `generate`, `run`, `report` and `probe`.
//!
//! Data goes to files, progress to stderr, and summaries to stdout. Every
//! failure prints one line `error[E_CODE]: message` to stderr and exits
//! nonzero.

use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::agent::TemplateSet;
use crate::config::{ConfigError, RunConfig};
use crate::dataset::{
    dataset_to_json, generate_dataset, read_dataset, AmbiguityType, DatasetCounts, DatasetError, InstructionEntry,
    ScenarioContext, Vocabulary,
};
use crate::engine::{Engine, EngineError, JsonlSink, RunSummary, TimingMode, BASELINES_FILE, TRANSCRIPTS_FILE};
use crate::eval::{
    compute_report, emit_reports, read_baselines, read_transcripts, render_table1, render_table2, EvalError, JudgeMode,
    ReportOptions, TermTable,
};

pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const DATASET_COPY: &str = "dataset.json";

#[derive(Debug, Parser)]
#[command(
    name = "ambidebate",
    version,
    about = "Ambiguity-detection debates between LLM agents"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a paired ambiguous/unambiguous instruction dataset.
    Generate(GenerateArgs),
    /// Run baselines and leader rotations over a dataset.
    Run(RunArgs),
    /// Compute metrics and write figure and table files for a finished run.
    Report(ReportArgs),
    /// Check that every configured backend answers.
    Probe(ProbeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Entries per category; the per-category flags override it.
    #[arg(long, default_value_t = 20)]
    pub per_type: usize,
    #[arg(long)]
    pub numerical: Option<usize>,
    #[arg(long)]
    pub attribute: Option<usize>,
    #[arg(long)]
    pub spatial: Option<usize>,
    /// Vocabulary JSON replacing the bundled one.
    #[arg(long)]
    pub vocabulary: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long, value_parser = parse_timing)]
    pub timing: Option<TimingMode>,
    #[arg(long)]
    pub max_rounds: Option<u32>,
    /// Start without checking that backends answer.
    #[arg(long)]
    pub skip_probe: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `run`.
    #[arg(long)]
    pub run_dir: PathBuf,
    /// Dataset to score against; defaults to the copy stored in the run directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Defaults to `<run-dir>/report`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<JudgeMode>,
    /// Judge the last proposal of non-consensus debates instead of failing them.
    #[arg(long)]
    pub judge_nonconsensus: bool,
    #[arg(long)]
    pub term_table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub config: PathBuf,
}

fn parse_timing(s: &str) -> Result<TimingMode, String> {
    match s {
        "wall" => Ok(TimingMode::Wall),
        "simulated" => Ok(TimingMode::Simulated),
        _ => Err(format!("expected wall or simulated, got {s}")),
    }
}

fn parse_mode(s: &str) -> Result<JudgeMode, String> {
    match s {
        "strict" => Ok(JudgeMode::Strict),
        "lenient" => Ok(JudgeMode::Lenient),
        _ => Err(format!("expected strict or lenient, got {s}")),
    }
}

/// A failure with its machine-readable code and exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub status: u8,
    pub message: String,
}

impl CliError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            status: 1,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let one_line = self.message.replace(['\n', '\r'], " ");
        write!(f, "error[{}]: {}", self.code, one_line)
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let code = match e {
            DatasetError::VocabularyExhausted { .. } => "E_VOCAB_EXHAUSTED",
            DatasetError::InvalidVocabulary(_) => "E_VOCAB",
            DatasetError::InvalidContext(_) => "E_CONTEXT",
            DatasetError::Io { .. } => "E_IO",
            DatasetError::Schema { .. } => "E_SCHEMA",
        };
        CliError::new(code, e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Io { .. } => "E_IO",
            _ => "E_CONFIG",
        };
        CliError::new(code, e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        let code = match e {
            EngineError::Sink(_) => "E_IO",
            EngineError::EmptyDataset => "E_DATASET",
            _ => "E_CONFIG",
        };
        CliError::new(code, e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let code = match e {
            EvalError::KeyMismatch { .. } => "E_KEY_MISMATCH",
            EvalError::DuplicateRecord { .. } | EvalError::InvalidRecord { .. } | EvalError::Schema { .. } => {
                "E_SCHEMA"
            }
            EvalError::TermTable(_) => "E_CONFIG",
            EvalError::Io { .. } => "E_IO",
        };
        CliError::new(code, e.to_string())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new("E_IO", format!("{}: {e}", path.display()))
}

/// What a run directory contains besides the record files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub roster: Vec<String>,
    pub max_rounds: u32,
    pub mode: JudgeMode,
    pub timing: TimingMode,
    pub seed: Option<u64>,
    pub dataset_entries: usize,
    pub summary: RunSummary,
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<Vec<InstructionEntry>, CliError> {
    let vocab = match &args.vocabulary {
        Some(p) => Vocabulary::load(p)?,
        None => Vocabulary::default(),
    };
    let counts = DatasetCounts {
        numerical: args.numerical.unwrap_or(args.per_type),
        attribute: args.attribute.unwrap_or(args.per_type),
        spatial: args.spatial.unwrap_or(args.per_type),
    };
    if counts.total() == 0 {
        warn!("no entries requested; writing an empty dataset");
    }
    let entries = generate_dataset(args.seed, counts, &vocab, &ScenarioContext::default())?;
    write_text(&args.out, &dataset_to_json(&entries))?;
    let count = |t: AmbiguityType| entries.iter().filter(|e| e.ambiguity_type == t).count();
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "wrote {} entries to {} (numerical {}, attribute_noun {}, attribute_color {}, spatial {})",
        entries.len(),
        args.out.display(),
        count(AmbiguityType::Numerical),
        count(AmbiguityType::AttributeNoun),
        count(AmbiguityType::AttributeColor),
        count(AmbiguityType::Spatial),
    );
    Ok(entries)
}

fn load_run_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(d) = &args.dataset {
        config.dataset = d.clone();
    }
    if let Some(o) = &args.out {
        config.output_dir = o.clone();
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    if let Some(p) = args.parallelism {
        config.parallelism = p;
    }
    if let Some(t) = args.timing {
        config.timing = t;
    }
    if let Some(r) = args.max_rounds {
        config.debate.max_rounds = r;
    }
    config.validate()?;
    Ok(config)
}

fn probe_all(config: &RunConfig) -> Result<(), CliError> {
    let pool = config.build_agents(|k| std::env::var(k).ok())?;
    for spec in &config.agents {
        let agent = pool.get(&spec.model).expect("pool built from the same specs");
        let status = agent.backend.probe();
        if status.healthy {
            info!(model = %spec.model, backend = %agent.backend.kind(), detail = %status.detail, "backend healthy");
        } else {
            return Err(CliError::new(
                "E_PROBE",
                format!(
                    "{} backend for {} unhealthy: {}",
                    agent.backend.kind(),
                    spec.model,
                    status.detail
                ),
            ));
        }
    }
    Ok(())
}

pub fn cmd_run(args: &RunArgs, cancel: Option<&AtomicBool>) -> Result<RunSummary, CliError> {
    let config = load_run_config(args)?;
    let dataset = read_dataset(&config.dataset)?;
    if !args.skip_probe {
        probe_all(&config)?;
    }
    let agents = config.build_agents(|k| std::env::var(k).ok())?;
    let templates = match &config.templates_dir {
        Some(dir) => TemplateSet::from_dir(dir).map_err(|e| CliError::new("E_CONFIG", e.to_string()))?,
        None => TemplateSet::default(),
    };
    let engine = Engine::new(config.debate_config(), agents, templates)?;

    let out = &config.output_dir;
    write_text(&out.join(DATASET_COPY), &dataset_to_json(&dataset))?;
    let mut sink = JsonlSink::create(out).map_err(|e| io_error(out, e))?;
    info!(entries = dataset.len(), roster = ?config.roster(), "starting run");
    let summary = engine.run_experiment(&dataset, &mut sink, config.parallelism, cancel)?;

    let manifest = RunManifest {
        roster: config.roster(),
        max_rounds: config.debate.max_rounds,
        mode: config.mode,
        timing: config.timing,
        seed: config.seed,
        dataset_entries: dataset.len(),
        summary: summary.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_text(&out.join(MANIFEST_FILE), &text)?;

    let _ = writeln!(
        std::io::stdout().lock(),
        "entries {}  baselines {} ({} errors)  debates {}: consensus {}, non-consensus {}, errors {}",
        summary.entries,
        summary.baselines,
        summary.baseline_errors,
        summary.debates,
        summary.consensus,
        summary.non_consensus,
        summary.debate_errors,
    );
    if summary.cancelled {
        return Err(CliError {
            code: "E_CANCELLED",
            status: 130,
            message: format!(
                "run interrupted after {} entries; completed records kept",
                summary.entries
            ),
        });
    }
    if summary.debates > 0 && summary.debate_errors == summary.debates {
        return Err(CliError::new("E_RUN", "every debate ended in an error"));
    }
    Ok(summary)
}

fn read_manifest(run_dir: &Path) -> Result<Option<RunManifest>, CliError> {
    let path = run_dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::new("E_SCHEMA", format!("{}: {e}", path.display())))
}

pub fn cmd_report(args: &ReportArgs) -> Result<Vec<PathBuf>, CliError> {
    if !args.run_dir.is_dir() {
        return Err(CliError::new(
            "E_IO",
            format!("{}: run directory not found", args.run_dir.display()),
        ));
    }
    let manifest = read_manifest(&args.run_dir)?;
    let dataset_path = args.dataset.clone().unwrap_or_else(|| args.run_dir.join(DATASET_COPY));
    let dataset = read_dataset(&dataset_path)?;
    let baselines = read_baselines(&args.run_dir.join(BASELINES_FILE))?;
    let transcripts = read_transcripts(&args.run_dir.join(TRANSCRIPTS_FILE))?;
    let table = match &args.term_table {
        Some(p) => TermTable::load(p)?,
        None => TermTable::default(),
    };
    let mut options = ReportOptions {
        nonconsensus_as_failure: !args.judge_nonconsensus,
        ..ReportOptions::default()
    };
    if let Some(m) = &manifest {
        options.roster = m.roster.clone();
        options.max_rounds = m.max_rounds;
        options.mode = m.mode;
    }
    if let Some(mode) = args.mode {
        options.mode = mode;
    }
    let report = compute_report(&baselines, &transcripts, &dataset, &options, &table)?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.run_dir.join("report"));
    let written = emit_reports(&report, &out_dir)?;

    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "Leader effectiveness ({} mode)", options.mode.as_str());
    let _ = write!(out, "{}", render_table1(&report));
    let _ = writeln!(out);
    let _ = writeln!(out, "Average debate time");
    let _ = write!(out, "{}", render_table2(&report));
    let _ = writeln!(out);
    let _ = writeln!(out, "wrote {} files to {}", written.len(), out_dir.display());
    Ok(written)
}

pub fn cmd_probe(args: &ProbeArgs) -> Result<(), CliError> {
    let config = RunConfig::load(&args.config)?;
    let pool = config.build_agents(|k| std::env::var(k).ok())?;
    let mut unhealthy = Vec::new();
    let mut out = std::io::stdout().lock();
    for spec in &config.agents {
        let agent = pool.get(&spec.model).expect("pool built from the same specs");
        let status = agent.backend.probe();
        let state = if status.healthy { "ok" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{state:<4} {:<24} {:<10} {}",
            spec.model,
            agent.backend.kind(),
            status.detail
        );
        if !status.healthy {
            unhealthy.push(spec.model.clone());
        }
    }
    if unhealthy.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(
            "E_PROBE",
            format!("unhealthy backends: {}", unhealthy.join(", ")),
        ))
    }
}

fn init_tracing() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .try_init();
}

/// Parses `args` and runs the selected command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.to_string();
            let first = rendered
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", CliError::new("E_USAGE", first));
            return ExitCode::from(2);
        }
    };
    init_tracing();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a).map(|_| ()),
        Command::Run(a) => {
            let cancel = Arc::new(AtomicBool::new(false));
            let flag = cancel.clone();
            if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
                warn!(error = %e, "interrupt handler not installed");
            }
            cmd_run(a, Some(&cancel)).map(|_| ())
        }
        Command::Report(a) => cmd_report(a).map(|_| ()),
        Command::Probe(a) => cmd_probe(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.status)
        }
    }
}
