#![allow(dead_code)]

use multisplit::{
    LcpProblem, MultisplittingSet, Partition, SparseMatrix, Splitting, WeightingScheme,
};
use nalgebra::DMatrix;
use rand::Rng;

/// Random H+ matrix: strictly diagonally dominant rows with mixed-sign
/// off-diagonals, then a positive column scaling so the dominance is only
/// generalized.
pub fn random_h_plus(rng: &mut impl Rng, n: usize, density: f64) -> SparseMatrix {
    let mut dense = vec![vec![0.0; n]; n];
    for (r, row) in dense.iter_mut().enumerate() {
        let mut off = 0.0;
        for (c, slot) in row.iter_mut().enumerate() {
            if c != r && rng.random_bool(density) {
                let v: f64 = rng.random_range(-1.0..1.0);
                *slot = v;
                off += v.abs();
            }
        }
        row[r] = off * rng.random_range(1.05..2.0) + rng.random_range(0.05..0.5);
    }
    let scale: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
    for row in dense.iter_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v *= scale[c];
        }
    }
    SparseMatrix::from_dense(&dense).unwrap()
}

pub fn random_rhs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

pub fn random_lcp(rng: &mut impl Rng, n: usize) -> LcpProblem {
    let a = random_h_plus(rng, n, 0.6);
    let f = random_rhs(rng, n);
    LcpProblem::new(a, f).unwrap()
}

/// Random splitting of an H+ matrix: `M` keeps the diagonal and a random
/// subset of the off-diagonal entries (lower only, or anywhere), `N = M - A`.
pub fn random_splitting(rng: &mut impl Rng, a: &SparseMatrix) -> Splitting {
    let lower_only = rng.random_bool(0.5);
    let keep = rng.random_range(0.0..1.0);
    let m = a.filter(|r, c, _| r == c || ((!lower_only || c < r) && rng.random_bool(keep)));
    Splitting::from_m(a, m).unwrap()
}

/// A set of `m` random splittings over a contiguous partition.
pub fn random_multisplitting(rng: &mut impl Rng, a: &SparseMatrix, m: usize) -> MultisplittingSet {
    let n = a.n_rows();
    let partition = Partition::contiguous(n, m).unwrap();
    let splittings = (0..m).map(|_| random_splitting(rng, a)).collect();
    MultisplittingSet::new(
        a,
        splittings,
        WeightingScheme::indicator(&partition),
        partition,
    )
    .unwrap()
}

pub fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.n_rows(), a.n_cols(), &a.to_dense())
}

/// `<M>^{-1} |N|` formed densely by LU.
pub fn dense_contraction(split: &Splitting) -> DMatrix<f64> {
    let m = dense(split.m());
    let n = dense(split.n());
    let cmp = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        if r == c {
            m[(r, c)].abs()
        } else {
            -m[(r, c)].abs()
        }
    });
    let inv = cmp
        .lu()
        .try_inverse()
        .expect("comparison matrix of M is nonsingular");
    inv * n.abs()
}

pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `rho(|D|^{-1}|B|)` from a dense eigenvalue computation.
pub fn dense_jacobi_radius(a: &SparseMatrix) -> f64 {
    let d = dense(a);
    let n = d.nrows();
    let j = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            0.0
        } else {
            d[(r, c)].abs() / d[(r, r)].abs()
        }
    });
    j.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Strictly diagonally dominant Z-matrix, hence a nonsingular M-matrix.
pub fn random_m_matrix(rng: &mut impl Rng, n: usize, density: f64) -> SparseMatrix {
    let mut triplets = Vec::new();
    for r in 0..n {
        let mut off = 0.0;
        for c in 0..n {
            if c != r && rng.random_bool(density) {
                let v: f64 = rng.random_range(0.01..1.0);
                triplets.push((r, c, -v));
                off += v;
            }
        }
        triplets.push((
            r,
            r,
            off * rng.random_range(1.01..1.5) + rng.random_range(0.01..0.2),
        ));
    }
    SparseMatrix::from_triplets(n, n, &triplets).unwrap()
}
