//! The five-point grid LCP family and a high-accuracy reference solver.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LcpError, Result};
use crate::matrix::{io, SparseMatrix};
use crate::sublcp::{natural_residual, pgs_sweep, positive_diagonal, LcpProblem, LcpSolution};

/// Grid side `p` (so `n = p^2`) and an optional diagonal shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLcpSpec {
    pub p: usize,
    pub shift: f64,
}

impl GridLcpSpec {
    pub fn new(p: usize) -> Self {
        Self { p, shift: 0.0 }
    }
}

/// Block tridiagonal `A` with `C = tridiag(-1, 4 + shift, -1)` on the
/// diagonal and `-I` beside it; `f_j = sin(2 pi (j + 1) / n)`.
pub fn make_grid_lcp(spec: GridLcpSpec) -> Result<LcpProblem> {
    let p = spec.p;
    if p < 2 {
        return Err(LcpError::InvalidParameter(format!(
            "grid side must be at least 2, got {p}"
        )));
    }
    if !spec.shift.is_finite() {
        return Err(LcpError::NonFinite {
            context: "grid shift",
        });
    }
    let n = p * p;
    let mut triplets = Vec::with_capacity(5 * n);
    for block in 0..p {
        for i in 0..p {
            let row = block * p + i;
            if block > 0 {
                triplets.push((row, row - p, -1.0));
            }
            if i > 0 {
                triplets.push((row, row - 1, -1.0));
            }
            triplets.push((row, row, 4.0 + spec.shift));
            if i + 1 < p {
                triplets.push((row, row + 1, -1.0));
            }
            if block + 1 < p {
                triplets.push((row, row + p, -1.0));
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &triplets)?;
    let f = (0..n)
        .map(|j| (2.0 * PI * (j + 1) as f64 / n as f64).sin())
        .collect();
    LcpProblem::new(a, f)
}

pub const REFERENCE_MAX_SWEEPS: usize = 2_000_000;

/// Projected Gauss-Seidel from zero until the max change between sweeps is
/// below `tol` and the natural residual below `10 * tol`.
pub fn reference_solve(prob: &LcpProblem, tol: f64) -> Result<LcpSolution> {
    if !(tol > 0.0) {
        return Err(LcpError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let a = prob.a();
    let diag = positive_diagonal(a)?;
    let mut x = vec![0.0; prob.n()];
    for _ in 0..REFERENCE_MAX_SWEEPS {
        let change = pgs_sweep(a, &diag, prob.f(), &mut x);
        if !change.is_finite() {
            return Err(LcpError::Stalled {
                context: "reference solve",
                detail: "iterate diverged".into(),
            });
        }
        if change < tol && natural_residual(prob, &x)? < 10.0 * tol {
            return LcpSolution::evaluate(prob, x);
        }
    }
    Err(LcpError::IterationLimit {
        context: "reference solve",
        iterations: REFERENCE_MAX_SWEEPS,
    })
}

/// Writes `A` as MatrixMarket and `f` as a one-value-per-line vector file.
pub fn export_problem(
    prob: &LcpProblem,
    matrix_path: impl AsRef<Path>,
    rhs_path: impl AsRef<Path>,
) -> Result<()> {
    io::write_matrix_market(matrix_path, prob.a())?;
    io::write_vector(rhs_path, prob.f())
}
