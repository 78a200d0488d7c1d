//! Bench flags, the key=value config file, and resolution into a validated
//! [`BenchConfig`].

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use multisplit::{
    AsyncSchedule, InnerSchedule, ReadRule, SplittingVariant, UpdatePolicy, DEFAULT_RANDOM_PERIOD,
};
use serde::Serialize;

use crate::CliError;

/// Inner tolerance of the SMM baseline.
pub const SMM_INNER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sync,
    AsyncSim,
    AsyncThreaded,
    Smm,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sync => "sync",
            Mode::AsyncSim => "async-sim",
            Mode::AsyncThreaded => "async-threaded",
            Mode::Smm => "smm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags of `multisplit bench`. Every flag can also be given as a
/// `key = value` line of the `--config` file; flags win.
#[derive(Debug, Clone, Default, Args)]
pub struct BenchArgs {
    /// key=value config file (keys are the long flag names)
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Grid side p of the built-in problem (n = p^2)
    #[arg(long, value_name = "P")]
    pub grid: Option<usize>,
    /// Diagonal shift of the grid problem
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<f64>,
    /// MatrixMarket coefficient matrix (with --rhs)
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,
    /// Right-hand side, one value per line
    #[arg(long, value_name = "FILE")]
    pub rhs: Option<PathBuf>,
    /// Number of processors / splittings
    #[arg(long)]
    pub m: Option<usize>,
    /// `contiguous:<m>` or a file with one block of indices per line
    #[arg(long)]
    pub partition: Option<String>,
    /// jacobi | block-lower
    #[arg(long)]
    pub splitting: Option<SplittingVariant>,
    #[arg(long)]
    pub omega: Option<f64>,
    /// fixed:<q> | adaptive:<eta> | tol:<theta>
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Staleness bound d (async-sim)
    #[arg(long)]
    pub staleness: Option<usize>,
    /// all | roundrobin:<period> | random[:<seed>[:<period>]] (async-sim)
    #[arg(long)]
    pub policy: Option<String>,
    /// latest | max-delay | cyclic | random[:<seed>] (async-sim)
    #[arg(long)]
    pub reads: Option<String>,
    /// Summary report path; stdout when absent
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Per-iteration CSV path
    #[arg(long, value_name = "FILE")]
    pub history: Option<PathBuf>,
    /// Seed for random policies and read rules given without one
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub outer_tol: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Report zero wall time so repeated runs write identical files
    #[arg(long)]
    pub no_timing: bool,
    /// Run the per-processor inner loops of sync mode on the rayon pool
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemSource {
    Grid { p: usize, shift: f64 },
    Files { matrix: PathBuf, rhs: PathBuf },
}

impl ProblemSource {
    /// Identity used to decide whether two reports are comparable.
    pub fn identity(&self) -> String {
        match self {
            ProblemSource::Grid { p, shift } => format!("grid p={p} shift={shift}"),
            ProblemSource::Files { matrix, rhs } => {
                format!("files {} {}", matrix.display(), rhs.display())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PartitionSpec {
    Contiguous,
    File { path: PathBuf },
}

/// Fully resolved bench configuration. JSON reports embed it without the
/// output paths, so identical runs written to different files match.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub problem: ProblemSource,
    /// Block count for contiguous partitions; a partition file fixes its own.
    pub m: Option<usize>,
    pub partition: PartitionSpec,
    #[serde(serialize_with = "as_display")]
    pub splitting: SplittingVariant,
    pub omega: f64,
    #[serde(serialize_with = "as_display")]
    pub schedule: InnerSchedule,
    pub mode: Mode,
    pub staleness: Option<usize>,
    #[serde(serialize_with = "opt_as_display")]
    pub policy: Option<UpdatePolicy>,
    #[serde(serialize_with = "opt_as_display")]
    pub reads: Option<ReadRule>,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub seed: u64,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub history: Option<PathBuf>,
    pub timing: bool,
    pub parallel: bool,
}

fn as_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn opt_as_display<T: fmt::Display, S: serde::Serializer>(
    v: &Option<T>,
    s: S,
) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

impl BenchConfig {
    pub fn async_schedule(&self) -> AsyncSchedule {
        let mut sched = AsyncSchedule::new(
            self.staleness.unwrap_or(0),
            self.policy.unwrap_or(UpdatePolicy::AllEveryStep),
        );
        if let Some(reads) = self.reads {
            sched.reads = reads;
        }
        sched
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Rewrites `key = value` lines of a config file as `--key=value` flags.
/// Blank lines and `#` comments are skipped; `true`/`false` toggle the
/// boolean switches.
pub fn config_file_flags(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut flags = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", idx + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(usage(format!(
                "config line {}: invalid key '{key}'",
                idx + 1
            )));
        }
        match key.as_str() {
            "no-timing" | "parallel" => match value {
                "true" => flags.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => {
                    return Err(usage(format!(
                        "config line {}: {key} takes true or false",
                        idx + 1
                    )))
                }
            },
            _ => flags.push(OsString::from(format!("--{key}={value}"))),
        }
    }
    Ok(flags)
}

/// Splices the flags of any `--config FILE` found after the `bench`
/// subcommand in front of the command-line flags, so the latter override.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(sub) = args.iter().position(|a| a == "bench") else {
        return Ok(args);
    };
    let mut path = None;
    let mut iter = args[sub + 1..].iter();
    while let Some(arg) = iter.next() {
        let Some(s) = arg.to_str() else { continue };
        if s == "--config" {
            path = iter.next().map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(&path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = args[..=sub].to_vec();
    out.extend(config_file_flags(&text)?);
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn parse_policy(text: &str, seed: u64) -> Result<UpdatePolicy, CliError> {
    if text == "random" {
        return Ok(UpdatePolicy::RandomFair {
            seed,
            period: DEFAULT_RANDOM_PERIOD,
        });
    }
    text.parse().map_err(|e| usage(format!("--policy: {e}")))
}

fn parse_reads(text: &str, seed: u64) -> Result<ReadRule, CliError> {
    if text == "random" {
        return Ok(ReadRule::Random { seed });
    }
    text.parse().map_err(|e| usage(format!("--reads: {e}")))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(usage(format!(
            "--{name} must be positive and finite, got {v}"
        )))
    }
}

/// Validates flag combinations and fills in defaults.
pub fn resolve(args: &BenchArgs) -> Result<BenchConfig, CliError> {
    let problem = match (args.grid, &args.matrix, &args.rhs) {
        (Some(p), None, None) => {
            if p < 2 {
                return Err(usage("--grid must be at least 2"));
            }
            let shift = args.shift.unwrap_or(0.0);
            if !shift.is_finite() {
                return Err(usage("--shift must be finite"));
            }
            ProblemSource::Grid { p, shift }
        }
        (None, Some(matrix), Some(rhs)) => {
            if args.shift.is_some() {
                return Err(usage("--shift applies only to --grid"));
            }
            ProblemSource::Files {
                matrix: matrix.clone(),
                rhs: rhs.clone(),
            }
        }
        (None, None, None) => {
            return Err(usage(
                "a problem is required: --grid P or --matrix FILE --rhs FILE",
            ))
        }
        _ => return Err(usage("use either --grid or both --matrix and --rhs")),
    };

    let Some(text) = args.partition.as_deref() else {
        return resolve_rest(
            args,
            problem,
            PartitionSpec::Contiguous,
            Some(args.m.unwrap_or(2)),
        );
    };
    match text.strip_prefix("contiguous:") {
        Some(m) => {
            let m: usize = m
                .parse()
                .map_err(|_| usage(format!("--partition: bad block count in '{text}'")))?;
            if args.m.is_some_and(|given| given != m) {
                return Err(usage("--partition block count disagrees with --m"));
            }
            resolve_rest(args, problem, PartitionSpec::Contiguous, Some(m))
        }
        None if args.m.is_some() => Err(usage("--m cannot be combined with a partition file")),
        None => resolve_rest(
            args,
            problem,
            PartitionSpec::File {
                path: PathBuf::from(text),
            },
            None,
        ),
    }
}

fn resolve_rest(
    args: &BenchArgs,
    problem: ProblemSource,
    partition: PartitionSpec,
    m: Option<usize>,
) -> Result<BenchConfig, CliError> {
    if m == Some(0) {
        return Err(usage("--m must be at least 1"));
    }
    let mode = args.mode.unwrap_or(Mode::Sync);
    let seed = args.seed.unwrap_or(0);

    let schedule = match (mode, args.schedule.as_deref()) {
        (Mode::Smm, Some(_)) => return Err(usage("--schedule cannot be combined with --mode smm")),
        (Mode::Smm, None) => InnerSchedule::inner_tolerance(SMM_INNER_TOL),
        (_, Some(text)) => text
            .parse()
            .map_err(|e| usage(format!("--schedule: {e}")))?,
        (_, None) => InnerSchedule::fixed(1),
    };

    let async_given = args.staleness.is_some() || args.policy.is_some() || args.reads.is_some();
    if async_given && mode != Mode::AsyncSim {
        return Err(usage(
            "--staleness, --policy and --reads apply only to --mode async-sim",
        ));
    }
    let policy = args
        .policy
        .as_deref()
        .map(|p| parse_policy(p, seed))
        .transpose()?;
    let reads = args
        .reads
        .as_deref()
        .map(|r| parse_reads(r, seed))
        .transpose()?;
    let (staleness, policy) = if mode == Mode::AsyncSim {
        (
            Some(args.staleness.unwrap_or(0)),
            Some(policy.unwrap_or(UpdatePolicy::AllEveryStep)),
        )
    } else {
        (None, None)
    };
    if args.parallel && mode != Mode::Sync && mode != Mode::Smm {
        return Err(usage("--parallel applies only to synchronous modes"));
    }

    let omega = positive("omega", args.omega.unwrap_or(1.0))?;
    let outer_tol = positive("outer-tol", args.outer_tol.unwrap_or(1e-6))?;
    let max_outer = args.max_outer.unwrap_or(100_000);
    if max_outer == 0 {
        return Err(usage("--max-outer must be at least 1"));
    }
    let format = args.format.unwrap_or(Format::Json);
    if let (Some(out), Some(history)) = (&args.out, &args.history) {
        if out == history {
            return Err(usage("--out and --history must differ"));
        }
    }

    let cfg = BenchConfig {
        problem,
        m,
        partition,
        splitting: args
            .splitting
            .unwrap_or(SplittingVariant::BlockLowerTriangular),
        omega,
        schedule,
        mode,
        staleness,
        policy,
        reads,
        outer_tol,
        max_outer,
        seed,
        format,
        out: args.out.clone(),
        history: args.history.clone(),
        timing: !args.no_timing,
        parallel: args.parallel,
    };
    cfg.async_schedule()
        .validate()
        .map_err(|e| usage(e.to_string()))?;
    cfg.schedule
        .validate()
        .map_err(|e| usage(format!("--schedule: {e}")))?;
    Ok(cfg)
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
