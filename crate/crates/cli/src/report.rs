//! Summary reports (JSON or one-row CSV), per-iteration history CSV, and the
//! `compare` table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use multisplit::IterationReport;
use serde::{Deserialize, Serialize};

use crate::config::{read_text, BenchConfig, Format};
use crate::CliError;

/// One row of results. Non-finite norms are written as empty / null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub n: usize,
    pub m: usize,
    pub mode: String,
    pub splitting: String,
    pub omega: f64,
    pub schedule: String,
    pub staleness: Option<usize>,
    pub policy: Option<String>,
    pub reads: Option<String>,
    pub converged: bool,
    pub outer_iterations: usize,
    pub total_inner_iterations: usize,
    pub final_update_norm: Option<f64>,
    pub final_residual: Option<f64>,
    pub omega_bound: f64,
    pub omega_outside_theory: bool,
    pub wall_time_seconds: f64,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Summary {
    pub fn new(cfg: &BenchConfig, n: usize, m: usize, report: &IterationReport) -> Self {
        let reads = cfg
            .staleness
            .map(|_| cfg.async_schedule().reads.to_string());
        Self {
            problem: cfg.problem.identity(),
            n,
            m,
            mode: cfg.mode.to_string(),
            splitting: cfg.splitting.to_string(),
            omega: cfg.omega,
            schedule: cfg.schedule.to_string(),
            staleness: cfg.staleness,
            policy: cfg.policy.map(|p| p.to_string()),
            reads,
            converged: report.converged,
            outer_iterations: report.outer_iterations,
            total_inner_iterations: report.total_inner_iterations,
            final_update_norm: finite(report.final_update_norm),
            final_residual: finite(report.final_residual),
            omega_bound: report.omega_bound,
            omega_outside_theory: report.omega_outside_theory,
            wall_time_seconds: if cfg.timing {
                report.wall_time_seconds
            } else {
                0.0
            },
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: &'a BenchConfig,
    summary: &'a Summary,
}

#[derive(Deserialize)]
struct JsonSummaryOnly {
    summary: Summary,
}

fn csv_err(path: Option<&Path>, err: csv::Error) -> CliError {
    CliError::Report(match path {
        Some(p) => format!("{}: {err}", p.display()),
        None => err.to_string(),
    })
}

/// Renders the summary in the requested format.
pub fn render_summary(
    cfg: &BenchConfig,
    summary: &Summary,
    format: Format,
) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&JsonReport {
                config: cfg,
                summary,
            })
            .map_err(|e| CliError::Report(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.serialize(summary).map_err(|e| csv_err(None, e))?;
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::Report(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Report(e.to_string()))
        }
    }
}

/// Per-iteration rows: `k, update_norm, natural_residual, inner_total,
/// inner_counts` with the counts joined by `;`. The residual column is left
/// empty for iterations the solver did not record it for.
pub fn render_history(report: &IterationReport) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "k",
        "update_norm",
        "natural_residual",
        "inner_total",
        "inner_counts",
    ])
    .map_err(|e| csv_err(None, e))?;
    for (k, norm) in report.update_norms.iter().enumerate() {
        let residual = report
            .natural_residuals
            .get(k)
            .map(|r| r.to_string())
            .unwrap_or_default();
        let counts = report.inner_counts.get(k).map(Vec::as_slice).unwrap_or(&[]);
        let total: usize = counts.iter().sum();
        let joined = counts
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            (k + 1).to_string(),
            norm.to_string(),
            residual,
            total.to_string(),
            joined,
        ])
        .map_err(|e| csv_err(None, e))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Report(e.to_string()))
}

/// Reads a summary written by `bench`, in either format. JSON is detected by
/// a leading `{`.
pub fn read_summary(path: &Path) -> Result<Summary, CliError> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('{') {
        let parsed: JsonSummaryOnly = serde_json::from_str(&text)
            .map_err(|e| CliError::Report(format!("{}: {e}", path.display())))?;
        return Ok(parsed.summary);
    }
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let mut iter = rows.deserialize::<Summary>();
    let first = iter
        .next()
        .ok_or_else(|| CliError::Report(format!("{}: no summary row", path.display())))?
        .map_err(|e| csv_err(Some(path), e))?;
    if iter.next().is_some() {
        return Err(CliError::Report(format!(
            "{}: expected a single summary row",
            path.display()
        )));
    }
    Ok(first)
}

/// Index of the smallest wall time; the first one wins ties.
pub fn fastest(summaries: &[Summary]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in summaries.iter().enumerate() {
        if best.is_none_or(|b| s.wall_time_seconds < summaries[b].wall_time_seconds) {
            best = Some(i);
        }
    }
    best
}

/// Loads the reports, checks they describe the same problem, and renders the
/// comparison table.
pub fn compare(paths: &[PathBuf]) -> Result<String, CliError> {
    if paths.len() < 2 {
        return Err(CliError::Usage("compare needs at least two reports".into()));
    }
    let summaries = paths
        .iter()
        .map(|p| read_summary(p))
        .collect::<Result<Vec<_>, _>>()?;
    let first = &summaries[0];
    for (path, s) in paths.iter().zip(&summaries).skip(1) {
        if s.problem != first.problem || s.n != first.n {
            return Err(CliError::Mismatch(format!(
                "{} solves '{}' (n = {}) but {} solves '{}' (n = {})",
                path.display(),
                s.problem,
                s.n,
                paths[0].display(),
                first.problem,
                first.n
            )));
        }
    }
    let best = fastest(&summaries);
    let mut out = String::new();
    let _ = writeln!(out, "problem: {} (n = {})", first.problem, first.n);
    let _ = writeln!(
        out,
        "{:>3}  {:<40}  {:>12}  {:>10}  {:>12}  {:>9}  fastest",
        "idx", "label", "time_s", "outer", "inner_total", "converged"
    );
    for (i, (path, s)) in paths.iter().zip(&summaries).enumerate() {
        let label = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let label = format!("{label} [{} {} {}]", s.mode, s.splitting, s.schedule);
        let _ = writeln!(
            out,
            "{:>3}  {:<40}  {:>12.6}  {:>10}  {:>12}  {:>9}  {}",
            i,
            label,
            s.wall_time_seconds,
            s.outer_iterations,
            s.total_inner_iterations,
            s.converged,
            if Some(i) == best { "*" } else { "" }
        );
    }
    Ok(out)
}
