//! Multisplittings `A = M_i - N_i` with diagonal weights `E_i`, hypothesis
//! validation and the inner-iteration threshold.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, LcpError, Result};
use crate::matrix::{classify, merge_rows, spectral_radius_nonneg, SparseMatrix};
use crate::sublcp::{positive_diagonal, MStructure};

const CLASSIFY_TOL: f64 = 1e-9;
const CLASSIFY_MAX_ITERS: usize = 200_000;
const CONTRACTION_TOL: f64 = 1e-10;
const CONTRACTION_MAX_ITERS: usize = 100_000;

/// Disjoint, nonempty owner sets covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    n: usize,
    owner_sets: Vec<Vec<usize>>,
    #[serde(skip)]
    owner: Vec<usize>,
}

impl Partition {
    pub fn from_sets(n: usize, mut owner_sets: Vec<Vec<usize>>) -> Result<Self> {
        if owner_sets.is_empty() {
            return Err(LcpError::InvalidPartition(
                "at least one block is required".into(),
            ));
        }
        let mut owner = vec![usize::MAX; n];
        for (block, set) in owner_sets.iter_mut().enumerate() {
            if set.is_empty() {
                return Err(LcpError::InvalidPartition(format!(
                    "block {block} is empty"
                )));
            }
            set.sort_unstable();
            for &idx in set.iter() {
                if idx >= n {
                    return Err(LcpError::InvalidPartition(format!(
                        "index {idx} out of range 0..{n}"
                    )));
                }
                if owner[idx] != usize::MAX {
                    return Err(LcpError::InvalidPartition(format!(
                        "index {idx} appears in more than one block"
                    )));
                }
                owner[idx] = block;
            }
        }
        if let Some(missing) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(LcpError::InvalidPartition(format!(
                "index {missing} is not covered"
            )));
        }
        Ok(Self {
            n,
            owner_sets,
            owner,
        })
    }

    /// `m` contiguous blocks of near-equal size; the first `n % m` blocks get
    /// one extra index.
    pub fn contiguous(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(LcpError::InvalidPartition(format!(
                "cannot split {n} indices into {m} nonempty blocks"
            )));
        }
        let base = n / m;
        let extra = n % m;
        let mut start = 0;
        let sets = (0..m)
            .map(|b| {
                let len = base + usize::from(b < extra);
                let set: Vec<usize> = (start..start + len).collect();
                start += len;
                set
            })
            .collect();
        Self::from_sets(n, sets)
    }

    /// Parses one block per line, indices separated by whitespace.
    pub fn parse(n: usize, text: &str) -> Result<Self> {
        let mut sets = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let set = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|_| LcpError::Parse {
                        line: lineno + 1,
                        message: format!("bad index '{tok}'"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            sets.push(set);
        }
        Self::from_sets(n, sets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.owner_sets.len()
    }

    pub fn owner_sets(&self) -> &[Vec<usize>] {
        &self.owner_sets
    }

    pub fn owner_of(&self, idx: usize) -> usize {
        self.owner[idx]
    }
}

/// Diagonals of the weighting matrices `E_i`, nonnegative and summing to `I`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightingScheme {
    weights: Vec<Vec<f64>>,
    #[serde(skip)]
    support: Vec<Vec<usize>>,
}

/// Allowed deviation of `sum_i E_i` from the identity.
pub const WEIGHT_SUM_TOL: f64 = 1e-15;

impl WeightingScheme {
    pub fn from_diagonals(weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = weights
            .first()
            .map(Vec::len)
            .ok_or_else(|| LcpError::InvalidWeights("no weights".into()))?;
        for (i, w) in weights.iter().enumerate() {
            if w.len() != n {
                return Err(LcpError::InvalidWeights(format!(
                    "weight {i} has length {}, expected {n}",
                    w.len()
                )));
            }
            ensure_finite(w, "weights")?;
            if w.iter().any(|&x| x < 0.0) {
                return Err(LcpError::InvalidWeights(format!(
                    "weight {i} has a negative entry"
                )));
            }
            if !w.iter().any(|&x| x > 0.0) {
                return Err(LcpError::InvalidWeights(format!(
                    "weight {i} has no positive entry"
                )));
            }
        }
        for j in 0..n {
            let sum: f64 = weights.iter().map(|w| w[j]).sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(LcpError::InvalidWeights(format!(
                    "weights at index {j} sum to {sum}, not 1"
                )));
            }
        }
        let support = weights
            .iter()
            .map(|w| {
                w.iter()
                    .enumerate()
                    .filter(|(_, &x)| x > 0.0)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        Ok(Self { weights, support })
    }

    /// Indicator weights: 1 on the owner set of each block, 0 elsewhere.
    pub fn indicator(partition: &Partition) -> Self {
        let n = partition.n();
        let weights = partition
            .owner_sets()
            .iter()
            .map(|set| {
                let mut w = vec![0.0; n];
                set.iter().for_each(|&j| w[j] = 1.0);
                w
            })
            .collect();
        let support = partition.owner_sets().to_vec();
        Self { weights, support }
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn n(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    /// Indices where `E_i` is positive, ascending.
    pub fn support(&self, i: usize) -> &[usize] {
        &self.support[i]
    }

    /// `||E_i||_inf`, the largest diagonal entry.
    pub fn norm_inf(&self, i: usize) -> f64 {
        self.weights[i].iter().copied().fold(0.0, f64::max)
    }
}

/// One splitting `A = M - N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Splitting {
    m: SparseMatrix,
    n: SparseMatrix,
    structure: MStructure,
    m_diag: Vec<f64>,
    cmp_m: SparseMatrix,
    abs_n: SparseMatrix,
}

impl Splitting {
    /// Builds the splitting with the given `M` and `N = M - A`.
    pub fn from_m(a: &SparseMatrix, m: SparseMatrix) -> Result<Self> {
        let n = m.sub(a)?;
        Self::from_parts(m, n)
    }

    /// Builds a splitting from explicit factors; `M - N` need not equal any
    /// particular `A` (that is checked by [`validate_multisplitting`]).
    pub fn from_parts(m: SparseMatrix, n: SparseMatrix) -> Result<Self> {
        m.require_square()?;
        if n.n_rows() != m.n_rows() || n.n_cols() != m.n_cols() {
            return Err(LcpError::DimensionMismatch {
                context: "splitting factors",
                expected: m.n_rows(),
                found: n.n_rows(),
            });
        }
        let m_diag = positive_diagonal(&m)?;
        let structure = MStructure::detect(&m);
        let cmp_m = m.comparison_matrix()?;
        let abs_n = n.abs();
        Ok(Self {
            m,
            n,
            structure,
            m_diag,
            cmp_m,
            abs_n,
        })
    }

    pub fn m(&self) -> &SparseMatrix {
        &self.m
    }

    pub fn n(&self) -> &SparseMatrix {
        &self.n
    }

    pub fn structure(&self) -> MStructure {
        self.structure
    }

    pub fn dim(&self) -> usize {
        self.m.n_rows()
    }

    pub(crate) fn m_diag(&self) -> &[f64] {
        &self.m_diag
    }

    /// `z = <M>^{-1} |N| v`.
    ///
    /// `<M>` inherits `M`'s pattern, so the diagonal and lower-triangular
    /// cases are exact substitutions; the general case uses Gauss-Seidel,
    /// which converges because `<M>` is an M-matrix under the splitting
    /// hypotheses.
    pub fn contraction_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut rhs = vec![0.0; v.len()];
        self.abs_n.spmv_into(v, &mut rhs);
        let mut z = vec![0.0; v.len()];
        match self.structure {
            MStructure::Diagonal => {
                for ((zj, r), d) in z.iter_mut().zip(&rhs).zip(&self.m_diag) {
                    *zj = r / d;
                }
            }
            MStructure::LowerTriangular => {
                for j in 0..v.len() {
                    let mut acc = rhs[j];
                    for (l, val) in self.cmp_m.row(j) {
                        if l < j {
                            acc -= val * z[l];
                        }
                    }
                    z[j] = acc / self.m_diag[j];
                }
            }
            MStructure::General => {
                for _ in 0..10_000 {
                    let mut change: f64 = 0.0;
                    let mut size: f64 = 0.0;
                    for j in 0..v.len() {
                        let mut acc = rhs[j];
                        for (l, val) in self.cmp_m.row(j) {
                            if l != j {
                                acc -= val * z[l];
                            }
                        }
                        let next = acc / self.m_diag[j];
                        change = change.max((next - z[j]).abs());
                        size = size.max(next.abs());
                        z[j] = next;
                    }
                    if change <= 1e-15 * size || !change.is_finite() {
                        break;
                    }
                }
            }
        }
        z
    }

    /// Estimate of `rho(<M>^{-1}|N|)`.
    pub fn contraction_radius(&self) -> Result<f64> {
        let est = spectral_radius_nonneg(
            |v| self.contraction_apply(v),
            self.dim(),
            CONTRACTION_TOL,
            CONTRACTION_MAX_ITERS,
        )?;
        Ok(est.radius)
    }
}

/// Built-in splitting families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplittingVariant {
    /// `M_i = D` for every block.
    Jacobi,
    /// `M_i = D` plus the strictly lower entries with both endpoints in `S_i`.
    BlockLowerTriangular,
}

impl fmt::Display for SplittingVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplittingVariant::Jacobi => "jacobi",
            SplittingVariant::BlockLowerTriangular => "block-lower",
        })
    }
}

impl FromStr for SplittingVariant {
    type Err = LcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(SplittingVariant::Jacobi),
            "block-lower" | "blocklowertriangular" | "block-lower-triangular" => {
                Ok(SplittingVariant::BlockLowerTriangular)
            }
            other => Err(LcpError::InvalidParameter(format!(
                "unknown splitting variant '{other}'"
            ))),
        }
    }
}

/// The splittings, weights and partition driving one solve.
#[derive(Debug, Clone)]
pub struct MultisplittingSet {
    pub splittings: Vec<Splitting>,
    pub weighting: WeightingScheme,
    pub partition: Partition,
    /// Cached estimates of `rho(<M_i>^{-1}|N_i|)`.
    pub contraction_estimates: Vec<f64>,
    /// Cached estimate of `rho(D^{-1}B)` for the matrix the set was built from.
    pub jacobi_radius: f64,
}

impl MultisplittingSet {
    /// Assembles a set from user-supplied splittings, estimating the
    /// contraction factors and the Jacobi radius of `a`.
    pub fn new(
        a: &SparseMatrix,
        splittings: Vec<Splitting>,
        weighting: WeightingScheme,
        partition: Partition,
    ) -> Result<Self> {
        let m = splittings.len();
        if weighting.m() != m || partition.m() != m {
            return Err(LcpError::InvalidParameter(format!(
                "{m} splittings, {} weights and {} blocks",
                weighting.m(),
                partition.m()
            )));
        }
        let n = a.n_rows();
        if partition.n() != n || weighting.n() != n || splittings.iter().any(|s| s.dim() != n) {
            return Err(LcpError::DimensionMismatch {
                context: "multisplitting",
                expected: n,
                found: partition.n(),
            });
        }
        let jacobi_radius =
            crate::matrix::jacobi_radius(a, CONTRACTION_TOL, CONTRACTION_MAX_ITERS)?.radius;
        let contraction_estimates = splittings
            .iter()
            .map(Splitting::contraction_radius)
            .collect::<Result<_>>()?;
        Ok(Self {
            splittings,
            weighting,
            partition,
            contraction_estimates,
            jacobi_radius,
        })
    }

    pub fn m(&self) -> usize {
        self.splittings.len()
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    /// `2 / (1 + gamma)`, the upper end of the relaxation range covered by the
    /// convergence theory.
    pub fn omega_bound(&self) -> f64 {
        2.0 / (1.0 + self.jacobi_radius)
    }
}

/// Builds one splitting per block of `partition` with indicator weights.
pub fn build_block_splitting(
    a: &SparseMatrix,
    partition: &Partition,
    variant: SplittingVariant,
) -> Result<MultisplittingSet> {
    a.require_square()?;
    if partition.n() != a.n_rows() {
        return Err(LcpError::DimensionMismatch {
            context: "partition",
            expected: a.n_rows(),
            found: partition.n(),
        });
    }
    let class = classify(a, CLASSIFY_TOL, CLASSIFY_MAX_ITERS)?;
    if !class.is_h_plus {
        return Err(LcpError::Precondition(format!(
            "coefficient matrix is not an H+-matrix (verdict {:?}, Jacobi radius {:.6})",
            class.verdict, class.jacobi_radius_estimate
        )));
    }
    let splittings = partition
        .owner_sets()
        .iter()
        .enumerate()
        .map(|(block, _)| {
            let m = match variant {
                SplittingVariant::Jacobi => a.filter(|r, c, _| r == c),
                SplittingVariant::BlockLowerTriangular => a.filter(|r, c, _| {
                    r == c
                        || (c < r
                            && partition.owner_of(r) == block
                            && partition.owner_of(c) == block)
                }),
            };
            Splitting::from_m(a, m)
        })
        .collect::<Result<Vec<_>>>()?;
    let contraction_estimates = splittings
        .iter()
        .map(Splitting::contraction_radius)
        .collect::<Result<_>>()?;
    Ok(MultisplittingSet {
        splittings,
        weighting: WeightingScheme::indicator(partition),
        partition: partition.clone(),
        contraction_estimates,
        jacobi_radius: class.jacobi_radius_estimate,
    })
}

/// A single failed hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// `M_i - N_i` differs from `A` at `(row, col)`.
    Decomposition {
        splitting: usize,
        row: usize,
        col: usize,
        difference: f64,
    },
    /// `<A> <= <M_i> - |N_i|` fails at `(row, col)`.
    ComparisonBound {
        splitting: usize,
        row: usize,
        col: usize,
        excess: f64,
    },
    /// `rho(<M_i>^{-1}|N_i|)` is not below one.
    Contraction { splitting: usize, estimate: f64 },
    /// Dimensions of the set do not match `A`.
    Shape { detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub contraction_estimates: Vec<f64>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks, for every splitting, `M_i - N_i = A`, `<A> <= <M_i> - |N_i|` and
/// `rho(<M_i>^{-1}|N_i|) < 1`. Entry comparisons allow `tol` relative to the
/// largest magnitude of `A`.
pub fn validate_multisplitting(
    a: &SparseMatrix,
    ms: &MultisplittingSet,
    tol: f64,
) -> ValidationReport {
    let mut violations = Vec::new();
    let mut estimates = Vec::with_capacity(ms.m());
    let n = a.n_rows();
    if !a.is_square() || ms.splittings.iter().any(|s| s.dim() != n) {
        violations.push(Violation::Shape {
            detail: format!(
                "matrix is {}x{}, splittings have dimensions {:?}",
                n,
                a.n_cols(),
                ms.splittings.iter().map(Splitting::dim).collect::<Vec<_>>()
            ),
        });
        return ValidationReport {
            violations,
            contraction_estimates: estimates,
        };
    }
    let scale = a
        .values()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let slack = tol * scale;
    let cmp_a = a.comparison_matrix().expect("square checked above");

    for (i, s) in ms.splittings.iter().enumerate() {
        if let Ok(diff) = s.m.sub(&s.n).and_then(|mn| mn.sub(a)) {
            for (row, col, d) in diff.triplets() {
                if d.abs() > slack {
                    violations.push(Violation::Decomposition {
                        splitting: i,
                        row,
                        col,
                        difference: d,
                    });
                }
            }
        }
        if let Ok(bound) = s.cmp_m.sub(&s.abs_n) {
            for row in 0..n {
                merge_rows(&cmp_a, &bound, row, |col, lhs, rhs| {
                    if lhs - rhs > slack {
                        violations.push(Violation::ComparisonBound {
                            splitting: i,
                            row,
                            col,
                            excess: lhs - rhs,
                        });
                    }
                });
            }
        }
        let estimate = s.contraction_radius().unwrap_or(f64::INFINITY);
        if !(estimate < 1.0) {
            violations.push(Violation::Contraction {
                splitting: i,
                estimate,
            });
        }
        estimates.push(estimate);
    }
    ValidationReport {
        violations,
        contraction_estimates: estimates,
    }
}

/// Smallest `s <= max_s` with `||T^s||_inf <= eta` for `T = <M>^{-1}|N|`.
///
/// `T` is nonnegative, so `||T^s||_inf = ||T^s e||_inf`; the power is never
/// formed.
pub fn min_inner_count(splitting: &Splitting, eta: f64, max_s: usize) -> Result<usize> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(LcpError::InvalidParameter(format!(
            "eta must lie in (0, 1), got {eta}"
        )));
    }
    let mut z = vec![1.0; splitting.dim()];
    let mut last_norm = 1.0;
    for s in 1..=max_s {
        z = splitting.contraction_apply(&z);
        last_norm = z.iter().copied().fold(0.0, f64::max);
        if last_norm <= eta {
            return Ok(s);
        }
    }
    Err(LcpError::InnerCountExceeded {
        max_s,
        eta,
        last_norm,
    })
}

/// `eta = gamma / sum_i ||E_i||_inf`.
pub fn compute_eta(gamma: f64, weighting: &WeightingScheme) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(LcpError::InvalidParameter(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    let total: f64 = (0..weighting.m()).map(|i| weighting.norm_inf(i)).sum();
    Ok(gamma / total)
}
