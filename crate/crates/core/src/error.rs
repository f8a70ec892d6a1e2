//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("non-invertible step function")]
    NonInvertible,

    #[error("tree depth {depth} exceeds cap {cap}")]
    DepthCap { depth: u32, cap: u32 },

    #[error("degenerate base weight: p must exceed 1")]
    DegenerateBaseWeight,

    #[error("level {level} not constructed (built {built} levels)")]
    LevelNotConstructed { level: u32, built: u32 },

    #[error("interval {0} is not a special interval of this weight")]
    NotSpecial(String),

    #[error("maximal function expects nonnegative input")]
    NegativeInput,

    #[error("ledger/brute-force divergence: {0}")]
    LedgerDivergence(String),

    #[error("point ({0}, {1}) outside hyperbolic domain")]
    OutsideDomain(f64, f64),

    #[error("main inequality violated at node {node} by {margin:e}")]
    MainInequality { node: String, margin: f64 },

    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("resource budget exceeded: {0}")]
    Budget(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
