use thiserror::Error;

/// Errors raised by matrix construction, analysis and the LCP solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LcpError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("malformed sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("non-positive diagonal entry {value} in row {row}")]
    NonPositiveDiagonal { row: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no H-matrix certificate or rejection after {iterations} power iterations")]
    NoCertificate { iterations: usize },

    #[error("{context} did not converge within {iterations} iterations")]
    IterationLimit {
        context: &'static str,
        iterations: usize,
    },

    #[error("{context} stalled: {detail}")]
    Stalled {
        context: &'static str,
        detail: String,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid weighting: {0}")]
    InvalidWeights(String),

    #[error("no s <= {max_s} with ||T^s|| <= {eta} (last norm {last_norm})")]
    InnerCountExceeded {
        max_s: usize,
        eta: f64,
        last_norm: f64,
    },

    #[error("sub-LCP failed at outer step {outer}, processor {processor}: {source}")]
    SubLcp {
        outer: usize,
        processor: usize,
        source: Box<LcpError>,
    },

    #[error("problem size {n} exceeds the limit {max}")]
    TooLarge { n: usize, max: usize },

    #[error("no feasible active set found")]
    Infeasible,

    #[error("worker {processor} failed: {message}")]
    WorkerFailed { processor: usize, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl From<std::io::Error> for LcpError {
    fn from(err: std::io::Error) -> Self {
        LcpError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LcpError>;

pub(crate) fn ensure_finite(values: &[f64], context: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LcpError::NonFinite { context })
    }
}

pub(crate) fn ensure_len(values: &[f64], expected: usize, context: &'static str) -> Result<()> {
    if values.len() == expected {
        Ok(())
    } else {
        Err(LcpError::DimensionMismatch {
            context,
            expected,
            found: values.len(),
        })
    }
}
