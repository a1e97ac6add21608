use thiserror::Error;

/// Errors produced by the recovery pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("basis cardinality overflows for dimension {dim}, order {order}")]
    CardinalityOverflow { dim: usize, order: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("QoI evaluation failed for sample {sample}: {reason}")]
    Evaluator { sample: usize, reason: String },

    #[error("non-finite {what} encountered for sample {sample}")]
    NonFinite { what: &'static str, sample: usize },

    #[error("C({p}, {s}) = {count} subsets exceeds the exhaustive guard {guard}; use the Monte Carlo estimator")]
    SubsetGuard {
        p: usize,
        s: usize,
        count: u128,
        guard: u128,
    },

    #[error("matrix is rank deficient by {deficiency} ({rank} of {cols} columns independent)")]
    RankDeficient {
        deficiency: usize,
        rank: usize,
        cols: usize,
    },

    #[error("sample bound is unsatisfiable for N up to {cap}: the truncation probability term never admits a solution")]
    SampleBoundUnsatisfiable { cap: usize },

    #[error("cross-validation fold {fold} has no rows")]
    EmptyFold { fold: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
