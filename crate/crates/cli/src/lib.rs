//! Command-line front end for the `multisplit` solvers.
//!
//! `bench` runs one solver configuration and writes a summary report,
//! `compare` tabulates several reports of the same problem, and `export`
//! writes a built-in test problem to disk.
//!
//! Exit codes: 0 success, 1 runtime / IO / solver error, 2 the solver hit
//! `--max-outer` without converging (reports are still written), 64 usage
//! error or inconsistent inputs.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use multisplit::matrix::io;
use multisplit::{
    build_block_splitting, export_problem, make_grid_lcp, solve_async_sim, solve_async_threaded,
    solve_sync, GridLcpSpec, IterationReport, LcpError, LcpProblem, MultisplittingSet, Partition,
    SolverConfig,
};
use thiserror::Error;

use config::{BenchArgs, BenchConfig, Mode, PartitionSpec, ProblemSource};
use report::Summary;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("inconsistent inputs: {0}")]
    Mismatch(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Solver(#[from] LcpError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Mismatch(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "multisplit",
    version,
    about = "Multisplitting solvers for H-matrix linear complementarity problems"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem with one solver configuration
    Bench(Box<BenchArgs>),
    /// Tabulate two or more bench reports of the same problem
    Compare(CompareArgs),
    /// Write a built-in grid problem as MatrixMarket + vector files
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report files (JSON or CSV)
    #[arg(required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_name = "P")]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub shift: f64,
    #[arg(long, value_name = "FILE")]
    pub matrix: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub rhs: PathBuf,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run(args: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let args = match config::expand_config(args) {
        Ok(args) => args,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Bench(args) => config::resolve(&args).and_then(|cfg| bench(&cfg, out, err)),
        Command::Compare(args) => report::compare(&args.reports).map(|table| {
            let _ = write!(out, "{table}");
            EXIT_OK
        }),
        Command::Export(args) => export(&args).map(|()| EXIT_OK),
    };
    result.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: {e}");
        e.exit_code()
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_problem(source: &ProblemSource) -> Result<LcpProblem, CliError> {
    match source {
        ProblemSource::Grid { p, shift } => Ok(make_grid_lcp(GridLcpSpec {
            p: *p,
            shift: *shift,
        })?),
        ProblemSource::Files { matrix, rhs } => {
            let a = io::parse_matrix_market(&config::read_text(matrix)?)?;
            let f = io::parse_vector(&config::read_text(rhs)?)?;
            if a.n_rows() != f.len() {
                return Err(CliError::Mismatch(format!(
                    "{} is {}x{} but {} has {} entries",
                    matrix.display(),
                    a.n_rows(),
                    a.n_cols(),
                    rhs.display(),
                    f.len()
                )));
            }
            Ok(LcpProblem::new(a, f)?)
        }
    }
}

fn load_partition(cfg: &BenchConfig, n: usize) -> Result<Partition, CliError> {
    match &cfg.partition {
        PartitionSpec::Contiguous => {
            let m = cfg.m.unwrap_or(2);
            if m > n {
                return Err(CliError::Mismatch(format!(
                    "--m {m} exceeds the problem size {n}"
                )));
            }
            Ok(Partition::contiguous(n, m)?)
        }
        PartitionSpec::File { path } => {
            Partition::parse(n, &config::read_text(path)?).map_err(|e| match e {
                LcpError::InvalidPartition(msg) => {
                    CliError::Mismatch(format!("{}: {msg}", path.display()))
                }
                other => other.into(),
            })
        }
    }
}

/// Builds the problem and splittings for `cfg` and runs the selected solver.
pub fn solve(cfg: &BenchConfig) -> Result<(usize, MultisplittingSet, IterationReport), CliError> {
    let prob = load_problem(&cfg.problem)?;
    let partition = load_partition(cfg, prob.n())?;
    let ms = build_block_splitting(prob.a(), &partition, cfg.splitting)?;
    let solver = SolverConfig {
        omega: cfg.omega,
        schedule: cfg.schedule,
        outer_tol: cfg.outer_tol,
        max_outer: cfg.max_outer,
        record_history: cfg.history.is_some(),
        parallel: cfg.parallel,
        ..SolverConfig::default()
    };
    let (_, report) = match cfg.mode {
        Mode::Sync | Mode::Smm => solve_sync(&prob, &ms, &solver)?,
        Mode::AsyncSim => solve_async_sim(&prob, &ms, &solver, &cfg.async_schedule())?,
        Mode::AsyncThreaded => solve_async_threaded(&prob, &ms, &solver, ms.m())?,
    };
    Ok((prob.n(), ms, report))
}

fn bench(cfg: &BenchConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let (n, ms, report) = solve(cfg)?;
    let summary = Summary::new(cfg, n, ms.m(), &report);
    let text = report::render_summary(cfg, &summary, cfg.format)?;
    if let Some(path) = &cfg.history {
        fs::write(path, report::render_history(&report)?).map_err(io_err(path))?;
    }
    match &cfg.out {
        Some(path) => fs::write(path, &text).map_err(io_err(path))?,
        None => out
            .write_all(text.as_bytes())
            .map_err(io_err(Path::new("<stdout>")))?,
    }
    if report.converged {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(
            err,
            "warning: not converged after {} outer iterations (last update {})",
            report.outer_iterations, report.final_update_norm
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn export(args: &ExportArgs) -> Result<(), CliError> {
    let prob = make_grid_lcp(GridLcpSpec {
        p: args.grid,
        shift: args.shift,
    })
    .map_err(|e| CliError::Usage(e.to_string()))?;
    export_problem(&prob, &args.matrix, &args.rhs)?;
    Ok(())
}
