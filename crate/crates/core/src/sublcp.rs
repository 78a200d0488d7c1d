//! LCP problem types, the per-processor sub-LCP solver and a brute-force
//! enumeration oracle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, LcpError, Result};
use crate::matrix::SparseMatrix;

/// Find `x >= 0` with `A x - f >= 0` and `x^T (A x - f) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LcpProblem {
    a: SparseMatrix,
    f: Vec<f64>,
}

impl LcpProblem {
    pub fn new(a: SparseMatrix, f: Vec<f64>) -> Result<Self> {
        a.require_square()?;
        ensure_len(&f, a.n_rows(), "LCP right-hand side")?;
        ensure_finite(&f, "LCP right-hand side")?;
        Ok(Self { a, f })
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// `A x - f`.
    pub fn slack(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut s = self.a.spmv(x)?;
        s.iter_mut().zip(&self.f).for_each(|(s, f)| *s -= f);
        Ok(s)
    }
}

/// A candidate solution with its merit values.
#[derive(Debug, Clone, PartialEq)]
pub struct LcpSolution {
    pub x: Vec<f64>,
    /// `||min(x, A x - f)||_inf`.
    pub residual: f64,
    /// `x^T (A x - f)`.
    pub complementarity_gap: f64,
}

impl LcpSolution {
    pub fn evaluate(prob: &LcpProblem, x: Vec<f64>) -> Result<Self> {
        let slack = prob.slack(&x)?;
        let residual = natural_residual_from_slack(&x, &slack);
        let complementarity_gap = x.iter().zip(&slack).map(|(a, b)| a * b).sum();
        Ok(Self {
            x,
            residual,
            complementarity_gap,
        })
    }
}

/// `||min(x, A x - f)||_inf`; zero exactly at solutions.
pub fn natural_residual(prob: &LcpProblem, x: &[f64]) -> Result<f64> {
    let slack = prob.slack(x)?;
    Ok(natural_residual_from_slack(x, &slack))
}

pub(crate) fn natural_residual_from_slack(x: &[f64], slack: &[f64]) -> f64 {
    x.iter()
        .zip(slack)
        .map(|(a, b)| a.min(*b).abs())
        .fold(0.0, f64::max)
}

/// How the `M` of a splitting can be solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MStructure {
    Diagonal,
    /// Lower triangular with a positive diagonal: one forward sweep is exact.
    LowerTriangular,
    General,
}

impl MStructure {
    /// The most specific tag describing `m`'s pattern.
    pub fn detect(m: &SparseMatrix) -> Self {
        if m.is_diagonal() {
            MStructure::Diagonal
        } else if m.is_lower_triangular() {
            MStructure::LowerTriangular
        } else {
            MStructure::General
        }
    }
}

/// Solves `y >= 0, M y >= F, y^T (M y - F) = 0`.
///
/// `Diagonal` and `LowerTriangular` are solved exactly by the projected
/// forward sweep `y_j = max(0, (F_j - sum_{l<j} m_jl y_l) / m_jj)`: row `j`
/// only involves `y_1..y_j`, so each step is a scalar LCP whose solution is
/// the projection. `General` runs projected Gauss-Seidel from zero until the
/// max change between sweeps is below `iter_tol`.
pub fn solve_sub_lcp(
    m: &SparseMatrix,
    structure: MStructure,
    rhs: &[f64],
    iter_tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    m.require_square()?;
    ensure_len(rhs, m.n_rows(), "sub-LCP right-hand side")?;
    ensure_finite(rhs, "sub-LCP right-hand side")?;
    let diag = positive_diagonal(m)?;
    let mut y = vec![0.0; rhs.len()];
    solve_sub_lcp_into(m, &diag, structure, rhs, iter_tol, max_iters, &mut y)?;
    Ok(y)
}

pub(crate) fn positive_diagonal(m: &SparseMatrix) -> Result<Vec<f64>> {
    let diag = m.diagonal();
    if let Some(row) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(LcpError::NonPositiveDiagonal {
            row,
            value: diag[row],
        });
    }
    Ok(diag)
}

/// Hot-path variant: `y` carries the warm start for the `General` path and
/// receives the solution. Returns the number of sweeps used.
pub(crate) fn solve_sub_lcp_into(
    m: &SparseMatrix,
    diag: &[f64],
    structure: MStructure,
    rhs: &[f64],
    iter_tol: f64,
    max_iters: usize,
    y: &mut [f64],
) -> Result<usize> {
    match structure {
        MStructure::Diagonal => {
            for ((yj, &fj), &d) in y.iter_mut().zip(rhs).zip(diag) {
                *yj = (fj / d).max(0.0);
            }
            Ok(1)
        }
        MStructure::LowerTriangular => {
            for j in 0..rhs.len() {
                let mut acc = rhs[j];
                for (l, v) in m.row(j) {
                    if l < j {
                        acc -= v * y[l];
                    }
                }
                y[j] = (acc / diag[j]).max(0.0);
            }
            Ok(1)
        }
        MStructure::General => {
            for sweep in 1..=max_iters {
                let change = pgs_sweep(m, diag, rhs, y);
                if !change.is_finite() {
                    return Err(LcpError::Stalled {
                        context: "projected Gauss-Seidel",
                        detail: "iterate diverged".into(),
                    });
                }
                if change < iter_tol {
                    return Ok(sweep);
                }
            }
            Err(LcpError::IterationLimit {
                context: "projected Gauss-Seidel",
                iterations: max_iters,
            })
        }
    }
}

/// One projected Gauss-Seidel sweep in place; returns the max change.
pub(crate) fn pgs_sweep(m: &SparseMatrix, diag: &[f64], rhs: &[f64], y: &mut [f64]) -> f64 {
    let mut change: f64 = 0.0;
    for j in 0..rhs.len() {
        let mut acc = rhs[j];
        for (l, v) in m.row(j) {
            if l != j {
                acc -= v * y[l];
            }
        }
        let next = (acc / diag[j]).max(0.0);
        change = change.max((next - y[j]).abs());
        y[j] = next;
    }
    change
}

/// Largest problem [`brute_force_lcp`] accepts.
pub const BRUTE_FORCE_MAX_N: usize = 20;

const BRUTE_FORCE_FEAS_TOL: f64 = 1e-12;

/// Enumerates all `2^n` candidate positive sets `P`, solving
/// `(A x)_P = f_P` with `x = 0` off `P`, and returns the first candidate with
/// `x_P > -1e-12` and `(A x - f) >= -1e-12` off `P`. Tiny negative entries of
/// the accepted candidate are clamped to zero.
pub fn brute_force_lcp(prob: &LcpProblem) -> Result<Vec<f64>> {
    let n = prob.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(LcpError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let dense = DMatrix::from_row_slice(n, n, &prob.a().to_dense());
    let f = prob.f();
    let mut x = vec![0.0; n];
    for mask in 0u32..(1u32 << n) {
        let active: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        x.iter_mut().for_each(|v| *v = 0.0);
        if !active.is_empty() {
            let k = active.len();
            let sub = DMatrix::from_fn(k, k, |r, c| dense[(active[r], active[c])]);
            let rhs = DVector::from_fn(k, |r, _| f[active[r]]);
            let Some(sol) = sub.lu().solve(&rhs) else {
                continue;
            };
            if sol
                .iter()
                .any(|v| !v.is_finite() || *v <= -BRUTE_FORCE_FEAS_TOL)
            {
                continue;
            }
            for (idx, &j) in active.iter().enumerate() {
                x[j] = sol[idx];
            }
        }
        let feasible = (0..n).filter(|&j| mask & (1 << j) == 0).all(|j| {
            let row: f64 = (0..n).map(|c| dense[(j, c)] * x[c]).sum();
            row - f[j] >= -BRUTE_FORCE_FEAS_TOL
        });
        if feasible {
            x.iter_mut().for_each(|v| *v = v.max(0.0));
            return Ok(x);
        }
    }
    Err(LcpError::Infeasible)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> SparseMatrix {
        SparseMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn diagonal_sub_lcp() {
        let d = m(&[&[2.0]]);
        assert_eq!(
            solve_sub_lcp(&d, MStructure::Diagonal, &[-4.0], 1e-12, 10).unwrap(),
            vec![0.0]
        );
        assert_eq!(
            solve_sub_lcp(&d, MStructure::Diagonal, &[4.0], 1e-12, 10).unwrap(),
            vec![2.0]
        );
    }

    #[test]
    fn triangular_sub_lcp_matches_enumeration() {
        // enumeration over the four active sets gives (2, 0) with row-2 slack 8
        let lower = m(&[&[2.0, 0.0], &[-1.0, 3.0]]);
        let y = solve_sub_lcp(
            &lower,
            MStructure::LowerTriangular,
            &[4.0, -10.0],
            1e-12,
            10,
        )
        .unwrap();
        assert_eq!(y, vec![2.0, 0.0]);
        let slack = lower.spmv(&y).unwrap()[1] + 10.0;
        assert_eq!(slack, 8.0);
        let general =
            solve_sub_lcp(&lower, MStructure::General, &[4.0, -10.0], 1e-14, 100).unwrap();
        assert_eq!(general, y);
    }

    #[test]
    fn sub_lcp_errors() {
        let bad = m(&[&[0.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            solve_sub_lcp(&bad, MStructure::General, &[1.0, 1.0], 1e-10, 10),
            Err(LcpError::NonPositiveDiagonal { row: 0, .. })
        ));
        let slow = m(&[&[1.0, -0.99], &[-0.99, 1.0]]);
        assert!(matches!(
            solve_sub_lcp(&slow, MStructure::General, &[1.0, 1.0], 1e-14, 3),
            Err(LcpError::IterationLimit { .. })
        ));
    }

    #[test]
    fn brute_force_examples() {
        let a = m(&[&[2.0, -1.0], &[-1.0, 2.0]]);
        let p = LcpProblem::new(a.clone(), vec![3.0, 0.0]).unwrap();
        let x = brute_force_lcp(&p).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let p = LcpProblem::new(m(&[&[1.0]]), vec![-1.0]).unwrap();
        assert_eq!(brute_force_lcp(&p).unwrap(), vec![0.0]);
        let p = LcpProblem::new(a, vec![-1.0, -1.0]).unwrap();
        assert_eq!(brute_force_lcp(&p).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn brute_force_limits() {
        let big = LcpProblem::new(SparseMatrix::identity(21), vec![1.0; 21]).unwrap();
        assert!(matches!(
            brute_force_lcp(&big),
            Err(LcpError::TooLarge { .. })
        ));
        // -1 on the diagonal: x = 0 is infeasible and positive x has negative slack
        let p = LcpProblem::new(m(&[&[-1.0]]), vec![1.0]).unwrap();
        assert_eq!(brute_force_lcp(&p), Err(LcpError::Infeasible));
    }

    #[test]
    fn natural_residual_examples() {
        let p = LcpProblem::new(m(&[&[1.0]]), vec![-1.0]).unwrap();
        assert_eq!(natural_residual(&p, &[0.0]).unwrap(), 0.0);
        let p = LcpProblem::new(m(&[&[1.0]]), vec![1.0]).unwrap();
        assert_eq!(natural_residual(&p, &[0.0]).unwrap(), 1.0);
        assert_eq!(natural_residual(&p, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn problem_validation() {
        assert!(LcpProblem::new(SparseMatrix::zeros(2, 3), vec![0.0; 2]).is_err());
        assert!(LcpProblem::new(SparseMatrix::identity(2), vec![0.0; 3]).is_err());
        assert!(LcpProblem::new(SparseMatrix::identity(1), vec![f64::NAN]).is_err());
    }

    #[test]
    fn structure_detection() {
        assert_eq!(
            MStructure::detect(&SparseMatrix::identity(3)),
            MStructure::Diagonal
        );
        assert_eq!(
            MStructure::detect(&m(&[&[2.0, 0.0], &[1.0, 3.0]])),
            MStructure::LowerTriangular
        );
        assert_eq!(
            MStructure::detect(&m(&[&[2.0, 1.0], &[0.0, 3.0]])),
            MStructure::General
        );
    }
}
