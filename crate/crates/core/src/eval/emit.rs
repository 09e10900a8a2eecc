use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use super::report::pct;
use super::{EvalError, MetricsReport};
use crate::dataset::Category;
use crate::engine::{BaselineRecord, DebateTranscript};

/// Every file written by [`emit_reports`], in write order.
pub const REPORT_FILES: [&str; 8] = [
    "fig2_overall.csv",
    "fig3_attribute.csv",
    "fig4_numerical.csv",
    "fig5_spatial.csv",
    "fig6_rounds_to_consensus.csv",
    "fig7_nonconsensus.csv",
    "table1_leader_effectiveness.csv",
    "table2_debate_time.csv",
];
const REPORT_JSON: &str = "report.json";

fn one_decimal(x: f64) -> String {
    format!("{x:.1}")
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

fn rate_rows(report: &MetricsReport, category: Option<Category>) -> Vec<Vec<String>> {
    report
        .configurations
        .iter()
        .map(|c| {
            let rate = match category {
                None => c.overall,
                Some(cat) => c.by_category.get(&cat).copied().unwrap_or_default(),
            };
            vec![
                c.name.clone(),
                rate.successes.to_string(),
                rate.total.to_string(),
                one_decimal(rate.rate_pct),
            ]
        })
        .collect()
}

/// The contents of each report file, keyed by file name.
fn render_all(report: &MetricsReport) -> Vec<(&'static str, Vec<u8>)> {
    let rate_header = ["configuration", "successes", "total", "success_rate_pct"];
    let mut files = vec![
        (REPORT_FILES[0], csv_bytes(&rate_header, rate_rows(report, None))),
        (
            REPORT_FILES[1],
            csv_bytes(&rate_header, rate_rows(report, Some(Category::Attribute))),
        ),
        (
            REPORT_FILES[2],
            csv_bytes(&rate_header, rate_rows(report, Some(Category::Numerical))),
        ),
        (
            REPORT_FILES[3],
            csv_bytes(&rate_header, rate_rows(report, Some(Category::Spatial))),
        ),
    ];

    let mut rounds = Vec::new();
    for l in &report.leaders {
        for (i, count) in l.rounds_histogram.iter().enumerate() {
            rounds.push(vec![
                l.leader.clone(),
                (i + 1).to_string(),
                count.to_string(),
                one_decimal(pct(*count, l.consensus)),
            ]);
        }
    }
    files.push((
        REPORT_FILES[4],
        csv_bytes(&["leader", "round", "count", "pct_of_consensus"], rounds),
    ));

    let nonconsensus = report
        .leaders
        .iter()
        .map(|l| {
            vec![
                l.leader.clone(),
                l.debates.to_string(),
                l.non_consensus.to_string(),
                l.errors.to_string(),
                one_decimal(l.non_consensus_rate_pct),
            ]
        })
        .collect();
    files.push((
        REPORT_FILES[5],
        csv_bytes(
            &["leader", "debates", "non_consensus", "errors", "non_consensus_rate_pct"],
            nonconsensus,
        ),
    ));

    let table1 = report
        .leaders
        .iter()
        .map(|l| {
            vec![
                l.leader.clone(),
                one_decimal(l.consensus_reach_pct),
                one_decimal(l.avg_rounds),
                one_decimal(l.consensus_success_pct),
            ]
        })
        .collect();
    files.push((
        REPORT_FILES[6],
        csv_bytes(&["leader", "consensus_reach_pct", "avg_rounds", "success_pct"], table1),
    ));

    let table2 = report
        .leaders
        .iter()
        .map(|l| vec![l.leader.clone(), one_decimal(l.avg_debate_time_s)])
        .collect();
    files.push((REPORT_FILES[7], csv_bytes(&["leader", "avg_debate_time_s"], table2)));

    let mut json = serde_json::to_vec_pretty(report).expect("report serializes");
    json.push(b'\n');
    files.push((REPORT_JSON, json));
    files
}

/// Writes the figure and table CSVs plus `report.json` into `out_dir` and
/// returns the written paths. Output depends only on `report`.
pub fn emit_reports(report: &MetricsReport, out_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut written = Vec::new();
    for (name, bytes) in render_all(report) {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

fn render_text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

/// Leader effectiveness as a plain-text table.
pub fn render_table1(report: &MetricsReport) -> String {
    let rows: Vec<Vec<String>> = report
        .leaders
        .iter()
        .map(|l| {
            vec![
                l.leader.clone(),
                one_decimal(l.consensus_reach_pct),
                one_decimal(l.avg_rounds),
                one_decimal(l.consensus_success_pct),
            ]
        })
        .collect();
    render_text_table(&["Leader", "Cons. Reach (%)", "Avg. Rounds", "Success (%)"], &rows)
}

/// Average debate time per leader as a plain-text table.
pub fn render_table2(report: &MetricsReport) -> String {
    let rows: Vec<Vec<String>> = report
        .leaders
        .iter()
        .map(|l| vec![l.leader.clone(), one_decimal(l.avg_debate_time_s)])
        .collect();
    render_text_table(&["Leader", "Avg. Debate Time (s)"], &rows)
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let file = File::open(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let de = &mut serde_json::Deserializer::from_str(&line);
        let record = serde_path_to_error::deserialize(de).map_err(|e| EvalError::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            message: if e.path().to_string() == "." {
                e.inner().to_string()
            } else {
                format!("{}: {}", e.path(), e.inner())
            },
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_baselines(path: &Path) -> Result<Vec<BaselineRecord>, EvalError> {
    read_jsonl(path)
}

pub fn read_transcripts(path: &Path) -> Result<Vec<DebateTranscript>, EvalError> {
    read_jsonl(path)
}
