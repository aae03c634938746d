use thiserror::Error;

use crate::vi::TraceRow;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("self-loop on firm {0} is not allowed")]
    SelfLoop(usize),
    #[error("firm index {index} out of range for {n} firms")]
    FirmOutOfRange { index: usize, n: usize },
    #[error("link {{{0}, {1}}} already present")]
    EdgeExists(usize, usize),
    #[error("link {{{0}, {1}}} not present")]
    EdgeMissing(usize, usize),
    #[error("degree sequence {0:?} is not graphical")]
    NotGraphical(Vec<usize>),
    #[error("enumeration over {n} firms exceeds cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("degree {degree} outside 0..={max}")]
    DomainError { degree: usize, max: usize },
    #[error("operation not supported for {0} cost model")]
    UnsupportedModel(&'static str),
    #[error("cost family fails validation: {0}")]
    InvalidCostFamily(String),
    #[error("graph degrees {actual:?} differ from target {target:?}")]
    DegreeMismatch {
        actual: Vec<usize>,
        target: Vec<usize>,
    },
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<TraceRow>,
    },
    #[error("starting point has negative entry at coordinate {0}")]
    InvalidStart(usize),
    #[error("analytic dc/dq {analytic} deviates from finite difference {numeric} at q={q}")]
    GradientMismatch { q: f64, analytic: f64, numeric: f64 },
    #[error("payoff oracle failed on graph {graph}: {source}")]
    OracleFailure {
        graph: String,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("graph text parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown solver '{0}'")]
    UnknownSolver(String),
    #[error("unknown base function '{0}'")]
    UnknownBase(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
