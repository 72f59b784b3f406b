use thiserror::Error;

use crate::conformal::RayPredictionSet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("linear system is singular (pivot {pivot:e} at column {column})")]
    SingularSystem { column: usize, pivot: f64 },

    #[error("matrix is not symmetric (|m[{row},{col}] - m[{col},{row}]| = {gap:e})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error(
        "irregular configuration: min(1 + g_i) = {min_margin:e}, upper/lower rays are not all oriented the same way"
    )]
    IrregularConfiguration { min_margin: f64 },

    #[error("upper and lower rays do not intersect: lower {lower:?}, upper {upper:?}")]
    EmptyIntersection {
        lower: RayPredictionSet,
        upper: RayPredictionSet,
    },

    #[error("prediction set is empty on the supplied grid")]
    EmptyPredictionSet,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain { name, value, domain }
    }
}
