//! C interface to dataset generation, experiment runs and reporting.
//!
//! Every fallible function returns an [`AmbidebateStatus`]. On failure the
//! message is kept per thread and can be fetched with
//! [`ambidebate_last_error`]. Strings returned through out-parameters are
//! owned by the caller and released with [`ambidebate_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use ambidebate::agent::TemplateSet;
use ambidebate::config::RunConfig;
use ambidebate::dataset::{
    dataset_to_json, generate_dataset, read_dataset, write_dataset, DatasetCounts, InstructionEntry, ScenarioContext,
    Vocabulary,
};
use ambidebate::engine::{Engine, JsonlSink, BASELINES_FILE, TRANSCRIPTS_FILE};
use ambidebate::eval::{
    compute_report, emit_reports, read_baselines, read_transcripts, JudgeMode, ReportOptions, TermTable,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbidebateStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Dataset = 3,
    Config = 4,
    Engine = 5,
    Report = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque dataset handle.
pub struct AmbidebateDataset {
    entries: Vec<InstructionEntry>,
}

/// Opaque experiment runner built from a run config file.
pub struct AmbidebateRunner {
    engine: Engine,
    parallelism: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(AmbidebateStatus, String);

/// Runs `f`, converting failures and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AmbidebateStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AmbidebateStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AmbidebateStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure(AmbidebateStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure(AmbidebateStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn null(name: &str) -> Failure {
    Failure(AmbidebateStatus::NullArgument, format!("{name} is null"))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL. The caller frees
/// the result with `ambidebate_string_free`.
#[no_mangle]
pub extern "C" fn ambidebate_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |m| m.clone().into_raw()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ambidebate_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ambidebate_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a dataset with the bundled vocabulary and tabletop scenario.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ambidebate_dataset_generate(
    seed: u64,
    numerical: usize,
    attribute: usize,
    spatial: usize,
    out: *mut *mut AmbidebateDataset,
) -> AmbidebateStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let counts = DatasetCounts {
            numerical,
            attribute,
            spatial,
        };
        let entries = generate_dataset(seed, counts, &Vocabulary::default(), &ScenarioContext::default())
            .map_err(|e| Failure(AmbidebateStatus::Dataset, e.to_string()))?;
        *out = Box::into_raw(Box::new(AmbidebateDataset { entries }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` as for `ambidebate_dataset_generate`.
#[no_mangle]
pub unsafe extern "C" fn ambidebate_dataset_load(
    path: *const c_char,
    out: *mut *mut AmbidebateDataset,
) -> AmbidebateStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let entries = read_dataset(&path).map_err(|e| Failure(AmbidebateStatus::Dataset, e.to_string()))?;
        *out = Box::into_raw(Box::new(AmbidebateDataset { entries }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ambidebate_dataset_save(
    dataset: *const AmbidebateDataset,
    path: *const c_char,
) -> AmbidebateStatus {
    guard(|| {
        let dataset = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let path = path_arg(path, "path")?;
        write_dataset(&dataset.entries, &path).map_err(|e| Failure(AmbidebateStatus::Io, e.to_string()))
    })
}

/// Number of entries, or 0 for a NULL handle.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ambidebate_dataset_len(dataset: *const AmbidebateDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.entries.len())
}

/// Serializes the dataset to JSON into `*out`.
///
/// # Safety
/// `dataset` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ambidebate_dataset_to_json(
    dataset: *const AmbidebateDataset,
    out: *mut *mut c_char,
) -> AmbidebateStatus {
    guard(|| {
        let dataset = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c_string(dataset_to_json(&dataset.entries));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ambidebate_dataset_free(dataset: *mut AmbidebateDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Builds a runner from a TOML run config. Backends are instantiated but not
/// probed.
///
/// # Safety
/// `config_path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ambidebate_runner_new(
    config_path: *const c_char,
    out: *mut *mut AmbidebateRunner,
) -> AmbidebateStatus {
    guard(|| {
        let path = path_arg(config_path, "config_path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = RunConfig::load(&path).map_err(|e| Failure(AmbidebateStatus::Config, e.to_string()))?;
        let agents = config
            .build_agents(|k| std::env::var(k).ok())
            .map_err(|e| Failure(AmbidebateStatus::Config, e.to_string()))?;
        let templates = match &config.templates_dir {
            Some(dir) => TemplateSet::from_dir(dir).map_err(|e| Failure(AmbidebateStatus::Config, e.to_string()))?,
            None => TemplateSet::default(),
        };
        let engine = Engine::new(config.debate_config(), agents, templates)
            .map_err(|e| Failure(AmbidebateStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(AmbidebateRunner {
            engine,
            parallelism: config.parallelism,
        }));
        Ok(())
    })
}

/// Runs every baseline and debate over `dataset`, writing the JSONL record
/// files into `out_dir`. A run summary in JSON goes to `*summary_json` when
/// that pointer is not NULL.
///
/// # Safety
/// Handles must be live, `out_dir` a NUL-terminated string, and
/// `summary_json` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ambidebate_runner_run(
    runner: *const AmbidebateRunner,
    dataset: *const AmbidebateDataset,
    out_dir: *const c_char,
    summary_json: *mut *mut c_char,
) -> AmbidebateStatus {
    guard(|| {
        let runner = runner.as_ref().ok_or_else(|| null("runner"))?;
        let dataset = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let dir = path_arg(out_dir, "out_dir")?;
        let mut sink = JsonlSink::create(&dir).map_err(|e| Failure(AmbidebateStatus::Io, e.to_string()))?;
        let summary = runner
            .engine
            .run_experiment(&dataset.entries, &mut sink, runner.parallelism, None)
            .map_err(|e| Failure(AmbidebateStatus::Engine, e.to_string()))?;
        if !summary_json.is_null() {
            *summary_json = to_c_string(serde_json::to_string(&summary).expect("summary serializes"));
        }
        Ok(())
    })
}

/// # Safety
/// `runner` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ambidebate_runner_free(runner: *mut AmbidebateRunner) {
    if !runner.is_null() {
        drop(Box::from_raw(runner));
    }
}

fn report(dataset: &[InstructionEntry], run_dir: &Path, out_dir: &Path, strict: bool) -> Result<String, Failure> {
    let report_err = |e: ambidebate::eval::EvalError| Failure(AmbidebateStatus::Report, e.to_string());
    let baselines = read_baselines(&run_dir.join(BASELINES_FILE)).map_err(report_err)?;
    let transcripts = read_transcripts(&run_dir.join(TRANSCRIPTS_FILE)).map_err(report_err)?;
    let options = ReportOptions {
        mode: if strict { JudgeMode::Strict } else { JudgeMode::Lenient },
        ..ReportOptions::default()
    };
    let report =
        compute_report(&baselines, &transcripts, dataset, &options, &TermTable::default()).map_err(report_err)?;
    emit_reports(&report, out_dir).map_err(report_err)?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

/// Computes metrics for the records in `run_dir`, writes the report files
/// into `out_dir`, and stores the report JSON in `*report_json` when that
/// pointer is not NULL.
///
/// # Safety
/// `dataset` must be a live handle, the paths NUL-terminated strings, and
/// `report_json` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ambidebate_report(
    dataset: *const AmbidebateDataset,
    run_dir: *const c_char,
    out_dir: *const c_char,
    strict: bool,
    report_json: *mut *mut c_char,
) -> AmbidebateStatus {
    guard(|| {
        let dataset = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let run_dir = path_arg(run_dir, "run_dir")?;
        let out_dir = path_arg(out_dir, "out_dir")?;
        let json = report(&dataset.entries, &run_dir, &out_dir, strict)?;
        if !report_json.is_null() {
            *report_json = to_c_string(json);
        }
        Ok(())
    })
}
