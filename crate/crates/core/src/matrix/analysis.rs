//! H-matrix theory at runtime: spectral radius estimates for nonnegative
//! operators, the Jacobi-radius classification test with a positive-vector
//! certificate, weighted max norms and an M-matrix linear solver.

use serde::Serialize;

use super::SparseMatrix;
use crate::error::{ensure_finite, ensure_len, LcpError, Result};

/// Relative tolerance used by [`classify`] for its internal power iteration.
const CLASSIFY_POWER_TOL: f64 = 1e-12;

/// Result of a power iteration on a nonnegative operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    /// Best estimate of the spectral radius.
    pub radius: f64,
    /// Collatz-Wielandt lower bound `min_j (Tv)_j / v_j`.
    pub lower: f64,
    /// Collatz-Wielandt upper bound `max_j (Tv)_j / v_j`.
    pub upper: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Strictly positive iterate attaining `upper`, so `T v <= upper * v`.
    pub vector: Vec<f64>,
}

/// Tightest Collatz-Wielandt bounds seen so far and the iterate attaining
/// the upper one.
struct CwBounds {
    lower: f64,
    upper: f64,
    vector: Vec<f64>,
}

impl CwBounds {
    /// `v` strictly positive, `tv = T v`.
    fn update(&mut self, v: &[f64], tv: &[f64]) {
        let (lo, hi) = tv
            .iter()
            .zip(v)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), (t, x)| {
                (lo.min(t / x), hi.max(t / x))
            });
        self.lower = self.lower.max(lo);
        if hi < self.upper {
            self.upper = hi;
            self.vector.clear();
            self.vector.extend_from_slice(v);
        }
    }
}

/// Estimates `rho(T)` for an entrywise nonnegative linear operator.
///
/// Starts from the all-ones vector with plain power iteration, which settles
/// quickly for primitive operators and for reducible ones whose radius is
/// tiny next to their norm, and gives `rho = 0` outright once `T^k 1 = 0`.
/// Bounds are only taken from strictly positive iterates. If they have not
/// closed after `4 n + 32` steps it switches to the shifted operator `T + I`,
/// restarting from the last strictly positive iterate. There the Perron root
/// `rho(T) + 1` is strictly dominant, so bipartite operators with eigenvalues
/// `±rho` still converge, and every iterate stays strictly positive.
///
/// Stops when the bounds close to within `tol`, or, in the shifted phase,
/// when the estimate's relative change stays below `tol` for `n`
/// consecutive iterations: from the all-ones start, entries far from any
/// structural irregularity stay exactly constant until the irregularity has
/// travelled to them, which takes at most `n - 1` steps. The reported
/// bounds are the tightest seen over all iterates. Non-convergence is
/// reported through `converged = false` rather than an error.
pub fn spectral_radius_nonneg<F>(
    mut apply: F,
    n: usize,
    tol: f64,
    max_iters: usize,
) -> Result<SpectralEstimate>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if n == 0 {
        return Err(LcpError::InvalidParameter(
            "operator dimension must be >= 1".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(LcpError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut v = vec![1.0; n];
    let mut cw = CwBounds {
        lower: 0.0,
        upper: f64::INFINITY,
        vector: v.clone(),
    };
    let mut op = |x: &[f64]| -> Result<Vec<f64>> {
        let mut tx = apply(x);
        ensure_len(&tx, n, "operator output")?;
        ensure_finite(&tx, "operator output")?;
        // roundoff in implicit operators can produce tiny negatives
        tx.iter_mut().for_each(|t| *t = t.max(0.0));
        Ok(tx)
    };
    let closed = |lower: f64, upper: f64| upper - lower <= tol * upper.max(f64::MIN_POSITIVE);
    let finish =
        |radius: f64, lower: f64, upper: f64, iterations, converged, vector| SpectralEstimate {
            radius: radius.clamp(lower, upper.max(lower)),
            lower,
            upper,
            iterations,
            converged,
            vector,
        };

    let plain_budget = (4 * n + 32).min(max_iters);
    let mut it = 0;
    // `w = T^k 1` up to scaling; `v` keeps the last strictly positive one
    let mut w = v.clone();
    while it < plain_budget {
        it += 1;
        let tw = op(&w)?;
        if w.iter().all(|&x| x > 0.0) {
            cw.update(&w, &tw);
            v.clone_from(&w);
        }
        let peak = tw.iter().copied().fold(0.0, f64::max);
        if peak == 0.0 {
            // T^k 1 = 0 with 1 > 0 forces T^k = 0
            return Ok(finish(0.0, 0.0, cw.upper, it, true, cw.vector));
        }
        if closed(cw.lower, cw.upper) {
            let radius = 0.5 * (cw.lower + cw.upper);
            return Ok(finish(radius, cw.lower, cw.upper, it, true, cw.vector));
        }
        w = tw.into_iter().map(|t| t / peak).collect();
    }

    let mut estimate = finish(
        0.5 * (cw.lower + cw.upper.min(f64::MAX)),
        cw.lower,
        cw.upper,
        it,
        false,
        cw.vector.clone(),
    );
    let mut previous = f64::NAN;
    let mut stable_run = 0usize;
    while it < max_iters {
        it += 1;
        let tv = op(&v)?;
        cw.update(&v, &tv);
        let shifted: Vec<f64> = tv.iter().zip(&v).map(|(t, x)| t + x).collect();
        let peak = shifted.iter().copied().fold(0.0, f64::max);
        let radius = (peak - 1.0).max(0.0);
        v = shifted.into_iter().map(|s| s / peak).collect();

        let scale = radius.abs().max(f64::MIN_POSITIVE);
        if previous.is_finite() && (radius - previous).abs() <= tol * scale {
            stable_run += 1;
        } else {
            stable_run = 0;
        }
        let converged = closed(cw.lower, cw.upper) || stable_run >= n;
        estimate = finish(radius, cw.lower, cw.upper, it, converged, cw.vector.clone());
        if converged {
            break;
        }
        previous = radius;
    }
    Ok(estimate)
}

/// Outcome of the H-matrix test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HVerdict {
    HMatrix,
    NotHMatrix,
    /// Jacobi radius estimate within the tolerance band around 1.
    Indeterminate,
}

/// Matrix classification with respect to the M/H/H+ classes.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixClass {
    pub is_z_pattern: bool,
    pub is_m_matrix: bool,
    pub is_h_matrix: bool,
    pub is_h_plus: bool,
    /// Positive `u` with `|D|^{-1}|B| u < u`, certifying the H property.
    pub witness_u: Option<Vec<f64>>,
    /// Estimate of `rho(|D|^{-1}|B|)`.
    pub jacobi_radius_estimate: f64,
    pub verdict: HVerdict,
}

/// Applies the Jacobi matrix `J = |D|^{-1}|B|` of the comparison matrix.
pub(crate) fn jacobi_apply(a: &SparseMatrix, diag_abs: &[f64], v: &[f64], out: &mut [f64]) {
    for (r, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, val) in a.row(r) {
            if c != r {
                acc += val.abs() * v[c];
            }
        }
        *slot = acc / diag_abs[r];
    }
}

fn checked_diagonal(a: &SparseMatrix) -> Result<Vec<f64>> {
    a.require_square()?;
    let diag = a.diagonal();
    if let Some(row) = diag.iter().position(|&d| d == 0.0) {
        return Err(LcpError::ZeroDiagonal { row });
    }
    Ok(diag)
}

/// Estimates the spectral radius of the Jacobi matrix of `<a>`.
pub fn jacobi_radius(a: &SparseMatrix, tol: f64, max_iters: usize) -> Result<SpectralEstimate> {
    let diag_abs: Vec<f64> = checked_diagonal(a)?.iter().map(|d| d.abs()).collect();
    let n = a.n_rows();
    spectral_radius_nonneg(
        |v| {
            let mut out = vec![0.0; n];
            jacobi_apply(a, &diag_abs, v, &mut out);
            out
        },
        n,
        tol,
        max_iters,
    )
}

/// Classifies `a` as M / H / H+ by certificate.
///
/// The H test estimates `rho(J)` for `J = |D|^{-1}|B|`. The matrix is declared
/// an H-matrix only when the estimate is below `1 - tol` and a positive
/// witness `u` with `J u < u` is exhibited. An estimate within `tol` of 1 is
/// reported as [`HVerdict::Indeterminate`].
pub fn classify(a: &SparseMatrix, tol: f64, max_power_iters: usize) -> Result<MatrixClass> {
    if !(0.0..1.0).contains(&tol) {
        return Err(LcpError::InvalidParameter(format!(
            "classification tolerance {tol} outside [0, 1)"
        )));
    }
    let diag = checked_diagonal(a)?;
    let n = a.n_rows();
    let diag_abs: Vec<f64> = diag.iter().map(|d| d.abs()).collect();
    let jacobi = |v: &[f64]| {
        let mut out = vec![0.0; n];
        jacobi_apply(a, &diag_abs, v, &mut out);
        out
    };

    let is_z_pattern = a.triplets().all(|(r, c, v)| r == c || v <= 0.0);
    let positive_diag = diag.iter().all(|&d| d > 0.0);

    let (verdict, witness_u, radius) = if n == 0 {
        (HVerdict::HMatrix, Some(Vec::new()), 0.0)
    } else {
        let est = spectral_radius_nonneg(jacobi, n, CLASSIFY_POWER_TOL, max_power_iters)?;
        let verdict = if est.converged {
            if est.radius < 1.0 - tol {
                HVerdict::HMatrix
            } else if est.radius > 1.0 + tol {
                HVerdict::NotHMatrix
            } else {
                HVerdict::Indeterminate
            }
        } else if est.upper < 1.0 - tol {
            HVerdict::HMatrix
        } else if est.lower > 1.0 + tol {
            HVerdict::NotHMatrix
        } else {
            return Err(LcpError::NoCertificate {
                iterations: max_power_iters,
            });
        };
        match verdict {
            HVerdict::HMatrix => {
                let witness = if est.upper < 1.0 {
                    Some(est.vector.clone())
                } else {
                    neumann_witness(jacobi, n, max_power_iters)
                };
                match witness {
                    Some(u) => (HVerdict::HMatrix, Some(u), est.radius),
                    None => {
                        return Err(LcpError::NoCertificate {
                            iterations: max_power_iters,
                        })
                    }
                }
            }
            other => (other, None, est.radius),
        }
    };

    let is_h_matrix = verdict == HVerdict::HMatrix;
    Ok(MatrixClass {
        is_z_pattern,
        is_m_matrix: is_h_matrix && is_z_pattern && positive_diag,
        is_h_matrix,
        is_h_plus: is_h_matrix && positive_diag,
        witness_u,
        jacobi_radius_estimate: radius,
        verdict,
    })
}

/// Builds `u = sum_{k<=K} J^k e`; once `J^{K+1} e < e` this satisfies
/// `J u = u - e + J^{K+1} e < u`.
fn neumann_witness(
    mut jacobi: impl FnMut(&[f64]) -> Vec<f64>,
    n: usize,
    max_terms: usize,
) -> Option<Vec<f64>> {
    let mut u = vec![1.0; n];
    let mut term = vec![1.0; n];
    for _ in 0..max_terms {
        term = jacobi(&term);
        if term.iter().all(|&t| t < 1.0) {
            let ju = jacobi(&u);
            if ju.iter().zip(&u).all(|(a, b)| a < b) {
                return Some(u);
            }
        }
        if term.iter().any(|t| !t.is_finite()) {
            return None;
        }
        u.iter_mut().zip(&term).for_each(|(a, b)| *a += b);
    }
    None
}

/// `max_j |v_j| / w_j` for a strictly positive weight vector `w`.
pub fn weighted_max_norm(v: &[f64], w: &[f64]) -> Result<f64> {
    ensure_len(v, w.len(), "weighted_max_norm")?;
    ensure_finite(v, "weighted_max_norm vector")?;
    ensure_finite(w, "weighted_max_norm weights")?;
    if let Some(j) = w.iter().position(|&x| x <= 0.0) {
        return Err(LcpError::InvalidParameter(format!(
            "weight {j} is not positive ({})",
            w[j]
        )));
    }
    Ok(v.iter()
        .zip(w)
        .map(|(x, wj)| x.abs() / wj)
        .fold(0.0, f64::max))
}

/// Sweep budget of [`solve_m_matrix`].
const M_SOLVE_MAX_SWEEPS: usize = 200_000;

/// Solves `M u = b` for a nonsingular M-matrix and `b >= 0` by Gauss-Seidel,
/// until `||M u - b||_inf <= tol * ||b||_inf`.
///
/// Only the cheap structural part of the M-matrix precondition (square,
/// Z-pattern, positive diagonal) is checked up front; a matrix that has the
/// structure but is singular or not monotone shows up as a stall.
pub fn solve_m_matrix(m: &SparseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    m.require_square()?;
    let n = m.n_rows();
    ensure_len(b, n, "solve_m_matrix rhs")?;
    ensure_finite(b, "solve_m_matrix rhs")?;
    if !(tol > 0.0) {
        return Err(LcpError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if b.iter().any(|&x| x < 0.0) {
        return Err(LcpError::Precondition(
            "right-hand side must be nonnegative".into(),
        ));
    }
    let diag = m.diagonal();
    if let Some(row) = diag.iter().position(|&d| d <= 0.0) {
        return Err(LcpError::Precondition(format!(
            "diagonal entry {row} is not positive"
        )));
    }
    if m.triplets().any(|(r, c, v)| r != c && v > 0.0) {
        return Err(LcpError::Precondition("matrix is not a Z-matrix".into()));
    }

    let b_norm = b.iter().copied().fold(0.0, f64::max);
    let mut u = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(u);
    }
    let target = tol * b_norm;
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    for _ in 0..M_SOLVE_MAX_SWEEPS {
        for r in 0..n {
            let mut acc = b[r];
            for (c, v) in m.row(r) {
                if c != r {
                    acc -= v * u[c];
                }
            }
            u[r] = acc / diag[r];
        }
        let residual = (0..n)
            .map(|r| (m.row_dot(r, &u) - b[r]).abs())
            .fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(LcpError::Stalled {
                context: "solve_m_matrix",
                detail: "iterate diverged".into(),
            });
        }
        if residual <= target {
            return Ok(u);
        }
        if residual < best * (1.0 - 1e-12) {
            best = residual;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 1000 {
                return Err(LcpError::Stalled {
                    context: "solve_m_matrix",
                    detail: format!("residual stuck at {best:e}"),
                });
            }
        }
    }
    Err(LcpError::IterationLimit {
        context: "solve_m_matrix",
        iterations: M_SOLVE_MAX_SWEEPS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> SparseMatrix {
        SparseMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn dense_apply(t: &[Vec<f64>]) -> impl FnMut(&[f64]) -> Vec<f64> + '_ {
        move |v| {
            t.iter()
                .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect()
        }
    }

    #[test]
    fn spectral_radius_of_zero_operator() {
        let est = spectral_radius_nonneg(|v| vec![0.0; v.len()], 3, 1e-12, 100).unwrap();
        assert!(est.converged);
        assert_eq!(est.radius, 0.0);
    }

    #[test]
    fn spectral_radius_of_bipartite_operator() {
        let t = vec![vec![0.0, 0.5], vec![0.5, 0.0]];
        let est = spectral_radius_nonneg(dense_apply(&t), 2, 1e-12, 1000).unwrap();
        assert!(est.converged);
        assert!((est.radius - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_reports_nonconvergence() {
        let t = vec![
            vec![0.9, 0.1, 0.0],
            vec![0.0, 0.5, 0.3],
            vec![0.2, 0.0, 0.7],
        ];
        let est = spectral_radius_nonneg(dense_apply(&t), 3, 1e-15, 2).unwrap();
        assert!(!est.converged);
        assert!(est.lower <= est.radius && est.radius <= est.upper);
    }

    #[test]
    fn classify_m_matrix() {
        let class = classify(&m(&[&[4.0, -1.0], &[-1.0, 4.0]]), 1e-8, 10_000).unwrap();
        assert!(class.is_m_matrix && class.is_h_plus && class.is_z_pattern);
        assert!((class.jacobi_radius_estimate - 0.25).abs() < 1e-10);
        let u = class.witness_u.unwrap();
        assert!(u.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn classify_rejects_non_h() {
        let class = classify(&m(&[&[1.0, -2.0], &[-2.0, 1.0]]), 1e-8, 10_000).unwrap();
        assert!(!class.is_h_matrix && !class.is_m_matrix && !class.is_h_plus);
        assert_eq!(class.verdict, HVerdict::NotHMatrix);
        assert!(class.witness_u.is_none());
    }

    #[test]
    fn classify_indeterminate_at_boundary() {
        // Jacobi radius exactly 1
        let class = classify(&m(&[&[1.0, -1.0], &[-1.0, 1.0]]), 1e-6, 10_000).unwrap();
        assert_eq!(class.verdict, HVerdict::Indeterminate);
        assert!(!class.is_h_matrix);
    }

    #[test]
    fn classify_h_but_not_m() {
        let class = classify(&m(&[&[-3.0, 1.0], &[2.0, 5.0]]), 1e-8, 10_000).unwrap();
        assert!(class.is_h_matrix);
        assert!(!class.is_h_plus && !class.is_m_matrix && !class.is_z_pattern);
    }

    #[test]
    fn classify_zero_diagonal() {
        let err = classify(&m(&[&[0.0, 1.0], &[1.0, 2.0]]), 1e-8, 100).unwrap_err();
        assert_eq!(err, LcpError::ZeroDiagonal { row: 0 });
    }

    #[test]
    fn classify_diagonal_matrix_has_witness() {
        let class = classify(&SparseMatrix::identity(4), 1e-8, 100).unwrap();
        assert!(class.is_m_matrix);
        assert_eq!(class.jacobi_radius_estimate, 0.0);
    }

    #[test]
    fn weighted_norms() {
        assert_eq!(weighted_max_norm(&[0.0, 0.0], &[0.3, 2.0]).unwrap(), 0.0);
        assert_eq!(weighted_max_norm(&[1.0, 2.0], &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(weighted_max_norm(&[3.0, 1.0], &[3.0, 2.0]).unwrap(), 1.0);
        assert!(weighted_max_norm(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn m_matrix_solves() {
        let u = solve_m_matrix(&SparseMatrix::identity(3), &[1.0; 3], 1e-12).unwrap();
        assert_eq!(u, vec![1.0; 3]);
        let u = solve_m_matrix(&m(&[&[2.0, 0.0], &[0.0, 4.0]]), &[2.0, 8.0], 1e-12).unwrap();
        assert_eq!(u, vec![1.0, 2.0]);
        let u = solve_m_matrix(&m(&[&[4.0, -1.0], &[-1.0, 4.0]]), &[1.0, 1.0], 1e-14).unwrap();
        assert!((u[0] - 1.0 / 3.0).abs() < 1e-13 && (u[1] - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn m_matrix_solve_preconditions() {
        let a = m(&[&[4.0, 1.0], &[-1.0, 4.0]]);
        assert!(matches!(
            solve_m_matrix(&a, &[1.0, 1.0], 1e-10),
            Err(LcpError::Precondition(_))
        ));
        let a = m(&[&[4.0, -1.0], &[-1.0, 4.0]]);
        assert!(matches!(
            solve_m_matrix(&a, &[-1.0, 1.0], 1e-10),
            Err(LcpError::Precondition(_))
        ));
        // Z-pattern with positive diagonal but singular-and-worse: diverges
        let a = m(&[&[1.0, -2.0], &[-2.0, 1.0]]);
        assert!(matches!(
            solve_m_matrix(&a, &[1.0, 1.0], 1e-10),
            Err(LcpError::Stalled { .. })
        ));
    }
}
