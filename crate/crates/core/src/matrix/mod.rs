//! Sparse matrix primitives and H-matrix analysis.

mod analysis;
pub mod io;
mod sparse;

pub use analysis::{
    classify, jacobi_radius, solve_m_matrix, spectral_radius_nonneg, weighted_max_norm, HVerdict,
    MatrixClass, SpectralEstimate,
};
pub(crate) use sparse::merge_rows;
pub use sparse::SparseMatrix;
