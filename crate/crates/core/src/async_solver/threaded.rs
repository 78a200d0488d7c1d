//! Genuinely concurrent asynchronous executor.
//!
//! One OS thread per processor. The published iterate lives behind a lock
//! and is replaced wholesale on every publication, so a reader always sees a
//! complete vector (possibly stale) and never a torn one.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use crate::error::{LcpError, Result};
use crate::splitting::MultisplittingSet;
use crate::sublcp::LcpProblem;
use crate::sync::{
    check_inputs, inner_plan, residual_of, run_inner, IterationReport, SolverConfig,
};

struct Published {
    x: Arc<Vec<f64>>,
    /// Latest local result of each worker.
    contributions: Vec<Vec<f64>>,
}

struct Shared {
    published: RwLock<Published>,
    stop: AtomicBool,
    converged: AtomicBool,
    last_change: Vec<AtomicU64>,
    sweeps: Vec<AtomicUsize>,
    history: Mutex<Vec<f64>>,
    counts: Mutex<Vec<Vec<usize>>>,
}

impl Shared {
    fn snapshot(&self) -> Arc<Vec<f64>> {
        let guard = self.published.read().unwrap_or_else(|e| e.into_inner());
        Arc::clone(&guard.x)
    }
}

/// Runs `workers` concurrent processors until the shared iterate has a
/// natural residual below `outer_tol * max(1, ||f||_inf)` and no worker's
/// last publication moved it by more than `outer_tol`.
///
/// Iterate sequences depend on thread interleaving; only the limit is
/// reproducible. Each worker stops after `max_outer` sweeps.
pub fn solve_async_threaded(
    prob: &LcpProblem,
    ms: &MultisplittingSet,
    cfg: &SolverConfig,
    workers: usize,
) -> Result<(Vec<f64>, IterationReport)> {
    check_inputs(prob, ms, cfg)?;
    let m = ms.m();
    if workers != m {
        return Err(LcpError::InvalidParameter(format!(
            "{workers} workers for {m} splittings"
        )));
    }
    let started = Instant::now();
    let n = prob.n();
    let plan = inner_plan(&cfg.schedule, ms)?;
    let x0 = cfg.start(n);
    let residual_target = cfg.outer_tol * prob.f().iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));

    let shared = Shared {
        published: RwLock::new(Published {
            x: Arc::new(x0.clone()),
            contributions: vec![x0; m],
        }),
        stop: AtomicBool::new(false),
        converged: AtomicBool::new(false),
        last_change: (0..m)
            .map(|_| AtomicU64::new(f64::INFINITY.to_bits()))
            .collect(),
        sweeps: (0..m).map(|_| AtomicUsize::new(0)).collect(),
        history: Mutex::new(Vec::new()),
        counts: Mutex::new(vec![Vec::new(); m]),
    };

    let worker = |i: usize| -> Result<()> {
        let split = &ms.splittings[i];
        let weights = &ms.weighting;
        let support = weights.support(i);
        for sweep in 0..cfg.max_outer {
            if shared.stop.load(Ordering::Acquire) {
                break;
            }
            let snapshot = shared.snapshot();
            let (y, count) =
                run_inner(prob, split, plan[i], &snapshot, cfg).map_err(|e| LcpError::SubLcp {
                    outer: sweep,
                    processor: i,
                    source: Box::new(e),
                })?;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(LcpError::NonFinite {
                    context: "worker result",
                });
            }

            let (published, change) = {
                let mut guard = shared.published.write().unwrap_or_else(|e| e.into_inner());
                guard.contributions[i] = y;
                let mut next = guard.x.as_ref().clone();
                let mut change: f64 = 0.0;
                for &l in support {
                    let combined: f64 = (0..m)
                        .map(|j| weights.weight(j)[l] * guard.contributions[j][l])
                        .sum();
                    let value = cfg.omega * combined + (1.0 - cfg.omega) * next[l];
                    change = change.max((value - next[l]).abs());
                    next[l] = value;
                }
                let next = Arc::new(next);
                guard.x = Arc::clone(&next);
                (next, change)
            };
            shared.last_change[i].store(change.to_bits(), Ordering::Release);
            shared.sweeps[i].fetch_add(1, Ordering::AcqRel);
            if cfg.record_history {
                shared
                    .history
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .push(change);
                shared.counts.lock().unwrap_or_else(|e| e.into_inner())[i].push(count);
            }

            let calm = shared
                .last_change
                .iter()
                .all(|c| f64::from_bits(c.load(Ordering::Acquire)) <= cfg.outer_tol);
            if calm && residual_of(prob, &published) < residual_target {
                shared.converged.store(true, Ordering::Release);
                shared.stop.store(true, Ordering::Release);
                break;
            }
        }
        Ok(())
    };

    let outcomes: Vec<std::thread::Result<Result<()>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..m)
            .map(|i| {
                let worker = &worker;
                let shared = &shared;
                scope.spawn(move || {
                    let outcome = catch_unwind(AssertUnwindSafe(|| worker(i)));
                    if !matches!(outcome, Ok(Ok(()))) {
                        shared.stop.store(true, Ordering::Release);
                    }
                    outcome
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(Err))
            .collect()
    });
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(Ok(())) => {}
            Ok(Err(err)) => return Err(err),
            Err(payload) => {
                let message = payload
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| payload.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "worker panicked".into());
                return Err(LcpError::WorkerFailed {
                    processor: i,
                    message,
                });
            }
        }
    }

    let x = shared.snapshot().as_ref().clone();
    let mut report = IterationReport::new(ms, cfg);
    let sweeps: Vec<usize> = shared
        .sweeps
        .iter()
        .map(|s| s.load(Ordering::Acquire))
        .collect();
    report.outer_iterations = sweeps.iter().copied().max().unwrap_or(0);
    report.converged = shared.converged.load(Ordering::Acquire);
    report.final_update_norm = shared
        .last_change
        .iter()
        .map(|c| f64::from_bits(c.load(Ordering::Acquire)))
        .fold(0.0, f64::max);
    report.final_residual = residual_of(prob, &x);
    let per_worker = shared
        .counts
        .into_inner()
        .unwrap_or_else(|e| e.into_inner());
    report.total_inner_iterations = per_worker.iter().flatten().sum();
    if cfg.record_history {
        report.update_norms = shared
            .history
            .into_inner()
            .unwrap_or_else(|e| e.into_inner());
        report.inner_counts = (0..report.outer_iterations)
            .map(|k| {
                per_worker
                    .iter()
                    .map(|c| c.get(k).copied().unwrap_or(0))
                    .collect()
            })
            .collect();
    }
    report.wall_time_seconds = started.elapsed().as_secs_f64();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SparseMatrix;
    use crate::splitting::{
        build_block_splitting, Partition, Splitting, SplittingVariant, WeightingScheme,
    };

    #[test]
    fn nonpositive_forcing_gives_zero() {
        let a = SparseMatrix::from_dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        let ms = build_block_splitting(
            &a,
            &Partition::contiguous(2, 2).unwrap(),
            SplittingVariant::Jacobi,
        )
        .unwrap();
        let prob = LcpProblem::new(a, vec![-1.0, -3.0]).unwrap();
        let (x, report) = solve_async_threaded(&prob, &ms, &SolverConfig::default(), 2).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert!(report.converged);
    }

    #[test]
    fn worker_count_must_match() {
        let a = SparseMatrix::identity(2);
        let ms = build_block_splitting(
            &a,
            &Partition::contiguous(2, 2).unwrap(),
            SplittingVariant::Jacobi,
        )
        .unwrap();
        let prob = LcpProblem::new(a, vec![1.0, 1.0]).unwrap();
        assert!(solve_async_threaded(&prob, &ms, &SolverConfig::default(), 3).is_err());
    }

    #[test]
    fn worker_failure_names_the_processor() {
        let a = SparseMatrix::from_dense(&[vec![2.0, -1.9], vec![-1.9, 2.0]]).unwrap();
        let p = Partition::contiguous(2, 2).unwrap();
        let good = Splitting::from_m(&a, a.filter(|r, c, _| r == c)).unwrap();
        let general = Splitting::from_m(&a, a.clone()).unwrap();
        let ms = MultisplittingSet::new(&a, vec![good, general], WeightingScheme::indicator(&p), p)
            .unwrap();
        let prob = LcpProblem::new(a, vec![1.0, 1.0]).unwrap();
        let cfg = SolverConfig {
            sub_max_iters: 2,
            ..SolverConfig::default()
        };
        let err = solve_async_threaded(&prob, &ms, &cfg, 2).unwrap_err();
        assert!(
            matches!(err, LcpError::SubLcp { processor: 1, .. }),
            "{err:?}"
        );
    }
}
