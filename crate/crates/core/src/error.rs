use alloc::vec::Vec;
use thiserror::Error;

/// Errors raised by measure, kernel, transport and bound operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty support: a point cloud needs at least one point")]
    EmptySupport,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{weights} weights for a support of {support} points")]
    WeightCount { weights: usize, support: usize },

    #[error("negative weight {0}")]
    NegativeWeight(f64),

    #[error("weights sum to {0}, expected 1 within 1e-12")]
    WeightsNotNormalized(f64),

    #[error("invalid box: lower bound exceeds upper bound on axis {0}")]
    InvalidBox(usize),

    #[error("exp overflow: similarity {similarity} > 709 for x = {x:?}, y = {y:?}")]
    PotentialOverflow {
        similarity: f64,
        x: Vec<f64>,
        y: Vec<f64>,
    },

    #[error("regularity constants of this potential need a bounded domain")]
    UnboundedDomainUnsupported,

    #[error("this bound needs a compact (bounded) domain")]
    RequiresCompactDomain,

    #[error("degenerate potential: inf G = {0} is not positive")]
    DegeneratePotential(f64),

    #[error("invalid input: {0}")]
    InvalidInput(&'static str),

    #[error("{keys} keys but {values} values")]
    KeyValueMismatch { keys: usize, values: usize },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("lcm(N, M) = {lcm} exceeds the oracle limit of 12")]
    OracleTooLarge { lcm: usize },

    #[error("support of {size} points exceeds the limit of {limit}")]
    SupportTooLarge { size: usize, limit: usize },

    #[error("matrix shape mismatch: {rows}x{cols} cannot act on dimension {input}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        input: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
