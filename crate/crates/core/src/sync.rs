//! Synchronous relaxed nonstationary multisplitting.
//!
//! Each outer step `k`, every processor `i` starts from `y^{0,i} = x^k` and
//! performs `s(k,i)` exact sub-LCP solves
//!
//! ```text
//! y^{j,i} >= 0,  M_i y^{j,i} >= F^{j,i},  (y^{j,i})^T (M_i y^{j,i} - F^{j,i}) = 0,
//! F^{j,i} = f + N_i y^{j-1,i},
//! ```
//!
//! after which the local results are combined as
//! `x^{k+1} = omega * sum_i E_i y^{s(k,i),i} + (1 - omega) x^k`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_finite, ensure_len, LcpError, Result};
use crate::splitting::{min_inner_count, MultisplittingSet, Splitting, WeightingScheme};
use crate::sublcp::{natural_residual_from_slack, solve_sub_lcp_into, LcpProblem};

/// How many inner solves each processor performs per outer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ScheduleKind {
    /// Exactly `q` solves.
    Fixed(usize),
    /// The smallest `s` with `||(<M_i>^{-1}|N_i|)^s||_inf <= eta`.
    Adaptive(f64),
    /// Solve until `|y^T (M_i y - F)| < theta`, with `F = f + N_i y` the
    /// right-hand side the next inner solve would use.
    InnerTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InnerSchedule {
    pub kind: ScheduleKind,
    pub min_count: usize,
    pub max_count: usize,
}

pub const DEFAULT_MAX_INNER: usize = 10_000;

impl InnerSchedule {
    pub fn fixed(q: usize) -> Self {
        Self::with_kind(ScheduleKind::Fixed(q))
    }

    pub fn adaptive(eta: f64) -> Self {
        Self::with_kind(ScheduleKind::Adaptive(eta))
    }

    pub fn inner_tolerance(theta: f64) -> Self {
        Self::with_kind(ScheduleKind::InnerTolerance(theta))
    }

    fn with_kind(kind: ScheduleKind) -> Self {
        Self {
            kind,
            min_count: 1,
            max_count: DEFAULT_MAX_INNER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ScheduleKind::Fixed(q) => q >= 1,
            ScheduleKind::Adaptive(eta) => eta > 0.0 && eta < 1.0,
            ScheduleKind::InnerTolerance(theta) => theta > 0.0 && theta.is_finite(),
        };
        if !ok {
            return Err(LcpError::InvalidParameter(format!(
                "invalid inner schedule {:?}",
                self.kind
            )));
        }
        if self.min_count < 1 || self.max_count < self.min_count {
            return Err(LcpError::InvalidParameter(format!(
                "inner count bounds [{}, {}] are invalid",
                self.min_count, self.max_count
            )));
        }
        Ok(())
    }
}

impl fmt::Display for InnerSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ScheduleKind::Fixed(q) => write!(f, "fixed:{q}"),
            ScheduleKind::Adaptive(eta) => write!(f, "adaptive:{eta}"),
            ScheduleKind::InnerTolerance(theta) => write!(f, "tol:{theta}"),
        }
    }
}

impl FromStr for InnerSchedule {
    type Err = LcpError;

    /// Accepts `fixed:q`, `adaptive:eta` and `tol:theta`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || LcpError::InvalidParameter(format!("cannot parse schedule '{s}'"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let schedule = match kind {
            "fixed" => Self::fixed(value.parse().map_err(|_| bad())?),
            "adaptive" => Self::adaptive(value.parse().map_err(|_| bad())?),
            "tol" | "inner-tol" => Self::inner_tolerance(value.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

/// Settings shared by the synchronous and asynchronous solvers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub omega: f64,
    pub schedule: InnerSchedule,
    /// Outer stop: `||x^{k+1} - x^k||_inf < outer_tol`.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub record_history: bool,
    /// Starting iterate; zero when absent.
    #[serde(skip)]
    pub initial: Option<Vec<f64>>,
    /// Run the per-processor inner loops on the rayon pool.
    pub parallel: bool,
    /// Stopping tolerance of projected Gauss-Seidel for `General` sub-LCPs.
    pub sub_tol: f64,
    pub sub_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            schedule: InnerSchedule::fixed(1),
            outer_tol: 1e-6,
            max_outer: 100_000,
            record_history: true,
            initial: None,
            parallel: false,
            sub_tol: 1e-13,
            sub_max_iters: 100_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(LcpError::InvalidParameter(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !(self.outer_tol > 0.0) {
            return Err(LcpError::InvalidParameter(format!(
                "outer_tol must be positive, got {}",
                self.outer_tol
            )));
        }
        if self.max_outer == 0 {
            return Err(LcpError::InvalidParameter(
                "max_outer must be at least 1".into(),
            ));
        }
        if !(self.sub_tol > 0.0) || self.sub_max_iters == 0 {
            return Err(LcpError::InvalidParameter(
                "sub-solver tolerance and budget must be positive".into(),
            ));
        }
        self.schedule.validate()?;
        if let Some(x0) = &self.initial {
            ensure_len(x0, n, "initial iterate")?;
            ensure_finite(x0, "initial iterate")?;
        }
        Ok(())
    }

    pub(crate) fn start(&self, n: usize) -> Vec<f64> {
        self.initial.clone().unwrap_or_else(|| vec![0.0; n])
    }
}

/// Record of one asynchronous run: read steps `s_i(k)` and update sets `J(k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsyncTrace {
    pub reads: Vec<Vec<usize>>,
    pub updates: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub outer_iterations: usize,
    pub converged: bool,
    /// `||x^{k+1} - x^k||_inf` per outer step.
    pub update_norms: Vec<f64>,
    /// Natural residual of `x^{k+1}` per outer step.
    pub natural_residuals: Vec<f64>,
    /// Inner solve counts, indexed `[k][i]`.
    pub inner_counts: Vec<Vec<usize>>,
    pub wall_time_seconds: f64,
    /// `2 / (1 + gamma)` for the estimated Jacobi radius `gamma`.
    pub omega_bound: f64,
    /// Set when `omega` lies outside `(0, omega_bound)`.
    pub omega_outside_theory: bool,
    pub final_update_norm: f64,
    pub final_residual: f64,
    pub total_inner_iterations: usize,
    pub trace: Option<AsyncTrace>,
}

impl IterationReport {
    pub(crate) fn new(ms: &MultisplittingSet, cfg: &SolverConfig) -> Self {
        let omega_bound = ms.omega_bound();
        Self {
            outer_iterations: 0,
            converged: false,
            update_norms: Vec::new(),
            natural_residuals: Vec::new(),
            inner_counts: Vec::new(),
            wall_time_seconds: 0.0,
            omega_bound,
            omega_outside_theory: !(cfg.omega > 0.0 && cfg.omega < omega_bound),
            final_update_norm: f64::NAN,
            final_residual: f64::NAN,
            total_inner_iterations: 0,
            trace: None,
        }
    }

    /// Equality ignoring the wall-clock time.
    pub fn same_run(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time_seconds = other.wall_time_seconds;
        &a == other
    }
}

/// Inner stopping rule for one processor at one outer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerStop {
    Count(usize),
    Tolerance {
        theta: f64,
        min_count: usize,
        max_count: usize,
    },
}

/// Resolves the inner schedule for processor `i` at outer step `k`.
///
/// `Fixed` and `Adaptive` do not depend on `k`; `Adaptive` is
/// `max(min_count, min_inner_count(M_i, N_i, eta))`.
pub fn schedule_inner_count(
    schedule: &InnerSchedule,
    i: usize,
    ms: &MultisplittingSet,
    _k: usize,
) -> Result<InnerStop> {
    schedule.validate()?;
    match schedule.kind {
        ScheduleKind::Fixed(q) => Ok(InnerStop::Count(q)),
        ScheduleKind::Adaptive(eta) => {
            let s = min_inner_count(&ms.splittings[i], eta, schedule.max_count)?;
            Ok(InnerStop::Count(s.max(schedule.min_count)))
        }
        ScheduleKind::InnerTolerance(theta) => Ok(InnerStop::Tolerance {
            theta,
            min_count: schedule.min_count,
            max_count: schedule.max_count,
        }),
    }
}

/// Per-processor inner stopping rules, resolved once per solve.
pub(crate) fn inner_plan(
    schedule: &InnerSchedule,
    ms: &MultisplittingSet,
) -> Result<Vec<InnerStop>> {
    (0..ms.m())
        .map(|i| schedule_inner_count(schedule, i, ms, 0))
        .collect()
}

/// Runs the nonstationary inner loop of one processor from `start`.
/// Returns the last local iterate and the number of sub-LCP solves.
pub(crate) fn run_inner(
    prob: &LcpProblem,
    split: &Splitting,
    stop: InnerStop,
    start: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, usize)> {
    let n = start.len();
    let f = prob.f();
    let mut y = start.to_vec();
    let mut rhs = vec![0.0; n];
    split.n().spmv_into(&y, &mut rhs);
    rhs.iter_mut().zip(f).for_each(|(r, fj)| *r += fj);
    let mut my = vec![0.0; n];
    let mut count = 0;
    loop {
        solve_sub_lcp_into(
            split.m(),
            split.m_diag(),
            split.structure(),
            &rhs,
            cfg.sub_tol,
            cfg.sub_max_iters,
            &mut y,
        )?;
        count += 1;
        // right-hand side of the next inner solve
        split.n().spmv_into(&y, &mut rhs);
        rhs.iter_mut().zip(f).for_each(|(r, fj)| *r += fj);
        let done = match stop {
            InnerStop::Count(q) => count >= q,
            InnerStop::Tolerance {
                theta,
                min_count,
                max_count,
            } => {
                if count >= max_count {
                    true
                } else if count < min_count {
                    false
                } else {
                    split.m().spmv_into(&y, &mut my);
                    let gap: f64 = y
                        .iter()
                        .zip(&my)
                        .zip(&rhs)
                        .map(|((yj, mj), fj)| yj * (mj - fj))
                        .sum();
                    gap.abs() < theta
                }
            }
        };
        if done {
            return Ok((y, count));
        }
    }
}

/// `sum_i E_i y_i`, accumulated over `i` in ascending order and only on the
/// support of each `E_i`.
pub(crate) fn weighted_sum(weighting: &WeightingScheme, ys: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    for (i, y) in ys.iter().enumerate() {
        let w = weighting.weight(i);
        for &l in weighting.support(i) {
            acc[l] += w[l] * y[l];
        }
    }
    acc
}

/// `omega * combined + (1 - omega) * prev`.
pub(crate) fn relax(omega: f64, combined: &[f64], prev: &[f64]) -> Vec<f64> {
    combined
        .iter()
        .zip(prev)
        .map(|(c, p)| omega * c + (1.0 - omega) * p)
        .collect()
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn residual_of(prob: &LcpProblem, x: &[f64]) -> f64 {
    let mut slack = vec![0.0; x.len()];
    prob.a().spmv_into(x, &mut slack);
    slack.iter_mut().zip(prob.f()).for_each(|(s, f)| *s -= f);
    natural_residual_from_slack(x, &slack)
}

pub(crate) fn check_inputs(
    prob: &LcpProblem,
    ms: &MultisplittingSet,
    cfg: &SolverConfig,
) -> Result<()> {
    if ms.n() != prob.n() {
        return Err(LcpError::DimensionMismatch {
            context: "multisplitting vs problem",
            expected: prob.n(),
            found: ms.n(),
        });
    }
    cfg.validate(prob.n())
}

/// What an observer sees after each synchronous outer step.
#[derive(Debug)]
pub struct SyncStep<'a> {
    pub k: usize,
    pub x_prev: &'a [f64],
    pub x_next: &'a [f64],
    /// `y^{s(k,i),i}` per processor.
    pub local: &'a [Vec<f64>],
    pub inner_counts: &'a [usize],
}

/// Synchronous relaxed nonstationary multisplitting.
pub fn solve_sync(
    prob: &LcpProblem,
    ms: &MultisplittingSet,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, IterationReport)> {
    solve_sync_observed(prob, ms, cfg, |_: &SyncStep<'_>| {})
}

/// [`solve_sync`] with a callback after every outer step.
pub fn solve_sync_observed<F>(
    prob: &LcpProblem,
    ms: &MultisplittingSet,
    cfg: &SolverConfig,
    mut observe: F,
) -> Result<(Vec<f64>, IterationReport)>
where
    F: FnMut(&SyncStep<'_>),
{
    check_inputs(prob, ms, cfg)?;
    let started = Instant::now();
    let n = prob.n();
    let plan = inner_plan(&cfg.schedule, ms)?;
    let mut report = IterationReport::new(ms, cfg);
    let mut x = cfg.start(n);

    for k in 0..cfg.max_outer {
        let solve_one = |i: usize| {
            run_inner(prob, &ms.splittings[i], plan[i], &x, cfg).map_err(|e| LcpError::SubLcp {
                outer: k,
                processor: i,
                source: Box::new(e),
            })
        };
        let results: Vec<(Vec<f64>, usize)> = if cfg.parallel {
            (0..ms.m())
                .into_par_iter()
                .map(solve_one)
                .collect::<Result<_>>()?
        } else {
            (0..ms.m()).map(solve_one).collect::<Result<_>>()?
        };
        let (ys, counts): (Vec<Vec<f64>>, Vec<usize>) = results.into_iter().unzip();
        let next = relax(cfg.omega, &weighted_sum(&ms.weighting, &ys, n), &x);
        ensure_finite(&next, "outer iterate")?;

        let delta = max_abs_diff(&next, &x);
        report.outer_iterations = k + 1;
        report.total_inner_iterations += counts.iter().sum::<usize>();
        report.final_update_norm = delta;
        if cfg.record_history {
            report.update_norms.push(delta);
            report.natural_residuals.push(residual_of(prob, &next));
            report.inner_counts.push(counts.clone());
        }
        observe(&SyncStep {
            k,
            x_prev: &x,
            x_next: &next,
            local: &ys,
            inner_counts: &counts,
        });
        x = next;
        if delta < cfg.outer_tol {
            report.converged = true;
            break;
        }
    }
    report.final_residual = residual_of(prob, &x);
    report.wall_time_seconds = started.elapsed().as_secs_f64();
    Ok((x, report))
}
