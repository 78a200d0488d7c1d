//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{dense, dense_contraction, inf_norm, max_diff, random_lcp, random_multisplitting};
use multisplit::{
    brute_force_lcp, build_block_splitting, classify, make_grid_lcp, min_inner_count,
    reference_solve, solve_async_sim, solve_async_sim_observed, solve_async_threaded, solve_sync,
    solve_sync_observed, AsyncSchedule, AsyncStep, GridLcpSpec, InnerSchedule, LcpProblem,
    MultisplittingSet, Partition, SolverConfig, SparseMatrix, SplittingVariant, SyncStep,
    UpdatePolicy,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn grid(p: usize) -> LcpProblem {
    make_grid_lcp(GridLcpSpec::new(p)).unwrap()
}

fn block_set(prob: &LcpProblem, m: usize, variant: SplittingVariant) -> MultisplittingSet {
    build_block_splitting(
        prob.a(),
        &Partition::contiguous(prob.n(), m).unwrap(),
        variant,
    )
    .unwrap()
}

fn fixed(q: usize) -> SolverConfig {
    SolverConfig {
        schedule: InnerSchedule::fixed(q),
        ..SolverConfig::default()
    }
}

/// `sum_i E_i H_i^q` with `H_i = <M_i>^{-1}|N_i|`, formed densely.
fn dense_step_operator(ms: &MultisplittingSet, q: usize) -> DMatrix<f64> {
    let n = ms.n();
    let mut total = DMatrix::zeros(n, n);
    for (i, split) in ms.splittings.iter().enumerate() {
        let h = dense_contraction(split);
        let mut power = DMatrix::identity(n, n);
        for _ in 0..q {
            power = &power * &h;
        }
        let e = DMatrix::from_diagonal(&DVector::from_column_slice(ms.weighting.weight(i)));
        total += e * power;
    }
    total
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=10);
        let prob = random_lcp(&mut rng, n);
        let m = rng.random_range(1..=n.min(3));
        let variant = if rng.random_bool(0.5) {
            SplittingVariant::Jacobi
        } else {
            SplittingVariant::BlockLowerTriangular
        };
        let ms = build_block_splitting(prob.a(), &Partition::contiguous(n, m).unwrap(), variant)
            .unwrap();
        let cfg = SolverConfig {
            outer_tol: 1e-12,
            ..fixed(2)
        };
        let exact = brute_force_lcp(&prob).unwrap();
        match solve_sync(&prob, &ms, &cfg) {
            Ok((x, report)) if report.converged => {
                let err = max_diff(&x, &exact);
                worst = worst.max(err);
                if err >= 1e-8 {
                    failures.push(format!("seed {seed}: error {err:.2e}"));
                }
            }
            Ok(_) => failures.push(format!("seed {seed}: no convergence")),
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!("200 random problems, worst error {worst:.2e}; failures: {failures:?}"),
    }
}

fn grid_correctness() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for p in [8, 16, 32] {
        let prob = grid(p);
        let reference = reference_solve(&prob, 1e-12).unwrap();
        for m in [2, 3] {
            let ms = block_set(&prob, m, SplittingVariant::BlockLowerTriangular);
            for q in [1, 2, 4, 8] {
                let cfg = SolverConfig {
                    record_history: false,
                    ..fixed(q)
                };
                let (x, report) = solve_sync(&prob, &ms, &cfg).unwrap();
                let err = max_diff(&x, &reference.x);
                worst = worst.max(err);
                let ok = report.converged
                    && report.final_update_norm < 1e-6
                    && report.final_residual < 1e-5
                    && err < 1e-5;
                if !ok {
                    failures.push(format!(
                        "p={p} m={m} q={q}: converged={} residual={:.2e} error={err:.2e}",
                        report.converged, report.final_residual
                    ));
                }
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "24 configurations, worst error vs reference {worst:.2e}; failures: {failures:?}"
        ),
    }
}

fn trend() -> Outcome {
    let prob = grid(16);
    let ms = block_set(&prob, 2, SplittingVariant::BlockLowerTriangular);
    let outer: Vec<usize> = [1, 2, 4, 8]
        .iter()
        .map(|&q| {
            solve_sync(&prob, &ms, &fixed(q))
                .unwrap()
                .1
                .outer_iterations
        })
        .collect();
    let nonincreasing = outer.windows(2).all(|w| w[1] <= w[0]);
    let nrm = solve_sync(&prob, &ms, &fixed(4)).unwrap().1;
    let smm_cfg = SolverConfig {
        schedule: InnerSchedule::inner_tolerance(1e-8),
        ..SolverConfig::default()
    };
    let smm = solve_sync(&prob, &ms, &smm_cfg).unwrap().1;
    Outcome {
        pass: nonincreasing
            && nrm.converged
            && smm.converged
            && nrm.total_inner_iterations < smm.total_inner_iterations,
        detail: format!(
            "outer iterations for q=1,2,4,8: {outer:?}; total inner NRM fixed:4 {} vs SMM {}",
            nrm.total_inner_iterations, smm.total_inner_iterations
        ),
    }
}

fn contraction_bound() -> Outcome {
    let prob = grid(8);
    let n = prob.n();
    let xs = reference_solve(&prob, 1e-12).unwrap().x;
    let cmp = dense(&prob.a().comparison_matrix().unwrap());
    let w = cmp.lu().solve(&DVector::from_element(n, 1.0)).unwrap();
    let wnorm = |v: &[f64]| {
        v.iter()
            .zip(w.iter())
            .map(|(a, b)| a.abs() / b)
            .fold(0.0, f64::max)
    };
    let mut failures = Vec::new();
    let mut tightest = f64::INFINITY;
    for variant in [
        SplittingVariant::Jacobi,
        SplittingVariant::BlockLowerTriangular,
    ] {
        let ms = block_set(&prob, 2, variant);
        for q in [1, 2, 4] {
            let tk = inf_norm(&dense_step_operator(&ms, q));
            for omega in [0.5, 0.9, 1.0] {
                let bound = omega * tk + (1.0 - omega).abs() + 1e-8;
                let cfg = SolverConfig { omega, ..fixed(q) };
                let mut steps = 0;
                solve_sync_observed(&prob, &ms, &cfg, |st: &SyncStep<'_>| {
                    let before: Vec<f64> = st.x_prev.iter().zip(&xs).map(|(a, b)| a - b).collect();
                    let after: Vec<f64> = st.x_next.iter().zip(&xs).map(|(a, b)| a - b).collect();
                    let ratio = wnorm(&after) / wnorm(&before);
                    tightest = tightest.min(bound - ratio);
                    if ratio > bound {
                        failures.push(format!(
                            "{variant} q={q} omega={omega} step {}: ratio {ratio:.6} > {bound:.6}",
                            st.k
                        ));
                    }
                    steps += 1;
                })
                .unwrap();
                if steps == 0 {
                    failures.push(format!("{variant} q={q} omega={omega}: no steps"));
                }
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!("smallest margin {tightest:.3e}; failures: {failures:?}"),
    }
}

fn error_recursion() -> Outcome {
    let prob = grid(4);
    let xs = reference_solve(&prob, 1e-13).unwrap().x;
    let mut failures = Vec::new();
    let mut checks = 0usize;
    for variant in [
        SplittingVariant::Jacobi,
        SplittingVariant::BlockLowerTriangular,
    ] {
        let ms = block_set(&prob, 2, variant);
        let h: Vec<DMatrix<f64>> = ms.splittings.iter().map(dense_contraction).collect();
        for (q, omega) in [(1, 1.0), (3, 1.0), (2, 0.7)] {
            let cfg = SolverConfig { omega, ..fixed(q) };
            solve_sync_observed(&prob, &ms, &cfg, |st: &SyncStep<'_>| {
                let start = DVector::from_iterator(
                    xs.len(),
                    st.x_prev.iter().zip(&xs).map(|(a, b)| (a - b).abs()),
                );
                for (i, y) in st.local.iter().enumerate() {
                    let mut bound = start.clone();
                    for _ in 0..st.inner_counts[i] {
                        bound = &h[i] * bound;
                    }
                    for j in 0..xs.len() {
                        checks += 1;
                        let err = (y[j] - xs[j]).abs();
                        if err > bound[j] + 1e-10 {
                            failures.push(format!(
                                "{variant} q={q} step {} processor {i} component {j}",
                                st.k
                            ));
                        }
                    }
                }
            })
            .unwrap();
        }
    }
    Outcome {
        pass: failures.is_empty() && checks > 0,
        detail: format!("{checks} componentwise checks; failures: {failures:?}"),
    }
}

fn async_equivalence() -> Outcome {
    let prob = grid(8);
    let ms = block_set(&prob, 2, SplittingVariant::BlockLowerTriangular);
    let cfg = fixed(2);

    let mut sync_iterates = Vec::new();
    let (x_sync, _) = solve_sync_observed(&prob, &ms, &cfg, |st: &SyncStep<'_>| {
        sync_iterates.push(st.x_next.to_vec())
    })
    .unwrap();
    let mut async_iterates = Vec::new();
    solve_async_sim_observed(
        &prob,
        &ms,
        &cfg,
        &AsyncSchedule::synchronous(),
        |st: &AsyncStep<'_>| async_iterates.push(st.state.local_iterates.clone()),
    )
    .unwrap();
    let identical = sync_iterates.len() == async_iterates.len()
        && sync_iterates
            .iter()
            .zip(&async_iterates)
            .all(|(s, locals)| {
                locals
                    .iter()
                    .all(|l| l.iter().zip(s).all(|(a, b)| a.to_bits() == b.to_bits()))
            });

    let mut stale_worst: f64 = 0.0;
    let mut stale_ok = true;
    for d in [1, 3, 7] {
        for policy in [
            UpdatePolicy::RoundRobin { period: 2 },
            UpdatePolicy::RandomFair {
                seed: 2024,
                period: 4,
            },
        ] {
            match solve_async_sim(&prob, &ms, &cfg, &AsyncSchedule::new(d, policy)) {
                Ok((x, report)) if report.converged => {
                    let err = max_diff(&x, &x_sync);
                    stale_worst = stale_worst.max(err);
                    stale_ok &= err < 1e-5;
                }
                _ => stale_ok = false,
            }
        }
    }

    let mut threaded_worst: f64 = 0.0;
    let mut threaded_ok = true;
    for _ in 0..10 {
        match solve_async_threaded(&prob, &ms, &cfg, 2) {
            Ok((x, report)) if report.converged => {
                let err = max_diff(&x, &x_sync);
                threaded_worst = threaded_worst.max(err);
                threaded_ok &= err < 1e-5;
            }
            _ => threaded_ok = false,
        }
    }
    Outcome {
        pass: identical && stale_ok && threaded_ok,
        detail: format!(
            "bit-identical at zero staleness: {identical}; bounded staleness worst {stale_worst:.2e}; threaded worst over 10 runs {threaded_worst:.2e}"
        ),
    }
}

fn inner_count_threshold() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = Vec::new();
    let mut splittings = 0;
    while splittings < 50 {
        let n = rng.random_range(2..=50);
        let prob = random_lcp(&mut rng, n);
        let ms = random_multisplitting(&mut rng, prob.a(), 1);
        if !multisplit::validate_multisplitting(prob.a(), &ms, 1e-12).is_valid() {
            continue;
        }
        splittings += 1;
        let split = &ms.splittings[0];
        let h = dense_contraction(split);
        for eta in [0.5, 0.1, 0.01] {
            let mut power = h.clone();
            let mut expected = 1;
            while inf_norm(&power) > eta {
                power = &power * &h;
                expected += 1;
            }
            let got = min_inner_count(split, eta, 100_000).unwrap();
            if got != expected {
                mismatches.push(format!("n={n} eta={eta}: {got} vs {expected}"));
            }
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!("{splittings} splittings x 3 thresholds; mismatches: {mismatches:?}"),
    }
}

fn classification() -> Outcome {
    let mut failures = Vec::new();
    for p in 2..=16 {
        let a = grid(p).a().clone();
        let class = classify(&a, 1e-9, 200_000).unwrap();
        let d = dense(&a);
        let certified = class.is_h_plus
            && class.witness_u.as_ref().is_some_and(|u| {
                (0..u.len()).all(|r| {
                    let ju: f64 = (0..u.len())
                        .filter(|&c| c != r)
                        .map(|c| d[(r, c)].abs() * u[c])
                        .sum::<f64>()
                        / d[(r, r)].abs();
                    u[r] > 0.0 && ju < u[r]
                })
            });
        if !certified {
            failures.push(format!("p={p}"));
        }
    }
    let bad = SparseMatrix::from_dense(&[vec![1.0, -2.0], vec![-2.0, 1.0]]).unwrap();
    let rejected = !classify(&bad, 1e-9, 200_000).unwrap().is_h_matrix;
    Outcome {
        pass: failures.is_empty() && rejected,
        detail: format!(
            "grid p=2..16 uncertified: {failures:?}; non-H example rejected: {rejected}"
        ),
    }
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        (
            "1 oracle equivalence on random H+ problems",
            Duration::from_secs(10),
            oracle_equivalence,
        ),
        (
            "2 grid problem correctness",
            Duration::from_secs(60),
            grid_correctness,
        ),
        (
            "3 outer-iteration trend and inner work vs SMM",
            Duration::from_secs(60),
            trend,
        ),
        (
            "4 per-step contraction bound",
            Duration::from_secs(30),
            contraction_bound,
        ),
        (
            "5 componentwise error recursion",
            Duration::from_secs(60),
            error_recursion,
        ),
        (
            "6 asynchronous equivalence and convergence",
            Duration::from_secs(60),
            async_equivalence,
        ),
        (
            "7 inner-count threshold vs dense powers",
            Duration::from_secs(60),
            inner_count_threshold,
        ),
        (
            "8 classification certificates",
            Duration::from_secs(60),
            classification,
        ),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let started = Instant::now();
        let outcome = run();
        let elapsed = started.elapsed();
        let pass = outcome.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {name} ({:.2}s of {}s): {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
