//! Deterministic single-threaded replay of the asynchronous iteration.

use std::collections::VecDeque;
use std::time::Instant;

use super::schedule::AsyncSchedule;
use crate::error::{ensure_finite, LcpError, Result};
use crate::splitting::MultisplittingSet;
use crate::sublcp::LcpProblem;
use crate::sync::{
    check_inputs, inner_plan, max_abs_diff, relax, residual_of, run_inner, weighted_sum,
    AsyncTrace, IterationReport, SolverConfig,
};

/// Per-processor iterates `x^{k,l}` and the last `d + 1` global states.
#[derive(Debug, Clone)]
pub struct AsyncState {
    pub local_iterates: Vec<Vec<f64>>,
    pub global_step: usize,
    history: VecDeque<Vec<Vec<f64>>>,
    depth: usize,
}

impl AsyncState {
    fn new(x0: &[f64], m: usize, staleness_bound: usize) -> Self {
        let local_iterates = vec![x0.to_vec(); m];
        let mut history = VecDeque::with_capacity(staleness_bound + 1);
        history.push_back(local_iterates.clone());
        Self {
            local_iterates,
            global_step: 0,
            history,
            depth: staleness_bound + 1,
        }
    }

    /// `x^{step, i}`; `step` must lie in the retained window.
    fn read(&self, step: usize, i: usize) -> &[f64] {
        let oldest = self.global_step + 1 - self.history.len();
        &self.history[step - oldest][i]
    }

    fn advance(&mut self, next: Vec<Vec<f64>>) {
        if self.history.len() == self.depth {
            self.history.pop_front();
        }
        self.history.push_back(next.clone());
        self.local_iterates = next;
        self.global_step += 1;
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }
}

/// What an observer sees after each simulated global step.
#[derive(Debug)]
pub struct AsyncStep<'a> {
    pub k: usize,
    /// `s_i(k)` per processor.
    pub reads: &'a [usize],
    /// `J(k)`.
    pub updated: &'a [usize],
    /// `y^{i, q(i,k)}` per processor.
    pub local_results: &'a [Vec<f64>],
    pub state: &'a AsyncState,
}

/// Deterministic replay of the asynchronous relaxed nonstationary
/// multisplitting iteration.
pub fn solve_async_sim(
    prob: &LcpProblem,
    ms: &MultisplittingSet,
    cfg: &SolverConfig,
    sched: &AsyncSchedule,
) -> Result<(Vec<f64>, IterationReport)> {
    solve_async_sim_observed(prob, ms, cfg, sched, |_: &AsyncStep<'_>| {})
}

/// [`solve_async_sim`] with a callback after every global step.
///
/// Step `k`: processor `i` starts from its own iterate `x^{s_i(k), i}`, runs
/// its inner solves, and each `l` in `J(k)` is set to
/// `omega * sum_i E_i y^i + (1 - omega) x^{k,l}`; the rest keep `x^{k,l}`.
/// The run stops once every update for `W + d` consecutive steps moved its
/// iterate by less than `outer_tol`, where `W` is the fairness window.
pub fn solve_async_sim_observed<F>(
    prob: &LcpProblem,
    ms: &MultisplittingSet,
    cfg: &SolverConfig,
    sched: &AsyncSchedule,
    mut observe: F,
) -> Result<(Vec<f64>, IterationReport)>
where
    F: FnMut(&AsyncStep<'_>),
{
    check_inputs(prob, ms, cfg)?;
    sched.validate()?;
    let started = Instant::now();
    let n = prob.n();
    let m = ms.m();
    let plan = inner_plan(&cfg.schedule, ms)?;
    let mut generator = sched.generator(m);
    let mut state = AsyncState::new(&cfg.start(n), m, sched.staleness_bound);
    let mut report = IterationReport::new(ms, cfg);
    let mut trace = AsyncTrace {
        reads: Vec::new(),
        updates: Vec::new(),
    };
    let calm_needed = sched.update_policy.fairness_window(m) + sched.staleness_bound;
    let mut calm = 0usize;
    let mut latest = 0usize;

    for k in 0..cfg.max_outer {
        let reads = generator.reads(k);
        let updated = generator.updates(k);

        let mut ys = Vec::with_capacity(m);
        let mut counts = Vec::with_capacity(m);
        for (i, &s) in reads.iter().enumerate() {
            let (y, count) = run_inner(prob, &ms.splittings[i], plan[i], state.read(s, i), cfg)
                .map_err(|e| LcpError::SubLcp {
                    outer: k,
                    processor: i,
                    source: Box::new(e),
                })?;
            ys.push(y);
            counts.push(count);
        }
        let combined = weighted_sum(&ms.weighting, &ys, n);

        let mut next = state.local_iterates.clone();
        let mut delta: f64 = 0.0;
        for &l in &updated {
            let x_l = relax(cfg.omega, &combined, &state.local_iterates[l]);
            ensure_finite(&x_l, "outer iterate")?;
            delta = delta.max(max_abs_diff(&x_l, &state.local_iterates[l]));
            next[l] = x_l;
        }
        latest = updated[0];
        state.advance(next);

        report.outer_iterations = k + 1;
        report.total_inner_iterations += counts.iter().sum::<usize>();
        report.final_update_norm = delta;
        if cfg.record_history {
            report.update_norms.push(delta);
            report
                .natural_residuals
                .push(residual_of(prob, &state.local_iterates[latest]));
            report.inner_counts.push(counts);
            trace.reads.push(reads.clone());
            trace.updates.push(updated.clone());
        }
        observe(&AsyncStep {
            k,
            reads: &reads,
            updated: &updated,
            local_results: &ys,
            state: &state,
        });

        calm = if delta < cfg.outer_tol { calm + 1 } else { 0 };
        if calm >= calm_needed {
            report.converged = true;
            break;
        }
    }

    let x = state.local_iterates[latest].clone();
    report.final_residual = residual_of(prob, &x);
    if cfg.record_history {
        report.trace = Some(trace);
    }
    report.wall_time_seconds = started.elapsed().as_secs_f64();
    Ok((x, report))
}
