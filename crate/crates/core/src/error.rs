//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid resolution {n}: need an even N >= 8")]
    InvalidResolution { n: usize },

    #[error("grid mismatch: fields live on different grids ({a} vs {b} per side)")]
    GridMismatch { a: usize, b: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vortex {index} at ({x:.6}, {y:.6}) lies {dist:.3e} from a grid node (minimum {min:.3e}); move the point or change N")]
    VortexOnNode {
        index: usize,
        x: f64,
        y: f64,
        dist: f64,
        min: f64,
    },

    #[error("singular evaluation: point ({x:.6}, {y:.6}) coincides with a vortex")]
    SingularEvaluation { x: f64, y: f64 },

    #[error("degenerate vortex configuration: {0}")]
    DegenerateConfig(String),

    #[error("out of scope: vortex multiplicities need m > n >= 0 (got m={m}, n={n}); equal counts fall outside the supported regime")]
    ScopeError { m: usize, n: usize },

    #[error("profile assumptions violated: {0}")]
    AssumptionViolation(String),

    #[error("barrier construction failed: {0}")]
    BarrierFailure(String),

    #[error("coupling search failed: {0}")]
    Lambda0Search(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("field dump is malformed: {0}")]
    BadFieldDump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
