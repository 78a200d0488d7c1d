//! Relaxed nonstationary multisplitting solvers for linear complementarity
//! problems `x >= 0, A x - f >= 0, x^T (A x - f) = 0` with H-matrix `A`.
//!
//! The synchronous solver, a deterministic bounded-staleness asynchronous
//! simulator and a threaded asynchronous executor share the same splitting
//! and sub-problem machinery.

pub mod async_solver;
pub mod error;
pub mod matrix;
pub mod problems;
pub mod splitting;
pub mod sublcp;
pub mod sync;

pub use async_solver::{
    solve_async_sim, solve_async_sim_observed, solve_async_threaded, AsyncSchedule, AsyncState,
    AsyncStep, ReadRule, UpdatePolicy, DEFAULT_RANDOM_PERIOD,
};
pub use error::{LcpError, Result};
pub use matrix::{classify, HVerdict, MatrixClass, SparseMatrix};
pub use problems::{export_problem, make_grid_lcp, reference_solve, GridLcpSpec};
pub use splitting::{
    build_block_splitting, compute_eta, min_inner_count, validate_multisplitting,
    MultisplittingSet, Partition, Splitting, SplittingVariant, ValidationReport, Violation,
    WeightingScheme,
};
pub use sublcp::{
    brute_force_lcp, natural_residual, solve_sub_lcp, LcpProblem, LcpSolution, MStructure,
};
pub use sync::{
    schedule_inner_count, solve_sync, solve_sync_observed, InnerSchedule, InnerStop,
    IterationReport, ScheduleKind, SolverConfig, SyncStep,
};
