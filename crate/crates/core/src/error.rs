use thiserror::Error;

/// Errors raised anywhere in the simulator.
///
/// Variant names are part of the user-facing contract: the CLI prints them
/// verbatim so that scripts can match on the failing stage.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BhcError {
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),

    #[error("CutoffTooSmall: truncated tail mass {tail_mass:.3e} exceeds tolerance {tolerance:.3e}{context}")]
    CutoffTooSmall {
        tail_mass: f64,
        tolerance: f64,
        context: String,
    },

    #[error("OrderExceedsCutoff: order {order} on mode {mode} exceeds cutoff {cutoff}")]
    OrderExceedsCutoff {
        mode: usize,
        order: usize,
        cutoff: usize,
    },

    #[error("ConvergenceGuard: |u| = {magnitude:.3} on mode {mode} exceeds limit {limit:.3}")]
    ConvergenceGuard {
        mode: usize,
        magnitude: f64,
        limit: f64,
    },

    #[error("EmptyOrder: n + m must be at least 1")]
    EmptyOrder,

    #[error("StructureViolation: row {row}: {reason}")]
    StructureViolation { row: usize, reason: String },

    #[error("CapacityExceeded: channel {channel} needs {needed} factors but depth {depth} holds {capacity}")]
    CapacityExceeded {
        channel: usize,
        needed: usize,
        depth: u32,
        capacity: usize,
    },

    #[error("SelectionInvalid: {0}")]
    SelectionInvalid(String),

    #[error("ChannelMismatch: {0}")]
    ChannelMismatch(String),

    #[error("ZeroLO: local oscillator amplitude is zero, moments are unrecoverable")]
    ZeroLo,

    #[error("GridMismatch: {0}")]
    GridMismatch(String),

    #[error("BudgetExceeded: {needed} amplitudes exceed the budget of {budget}")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("NotPRepresentable: {0}")]
    NotPRepresentable(String),

    #[error("Io: {0}")]
    Io(String),

    #[error("Parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for BhcError {
    fn from(e: std::io::Error) -> Self {
        BhcError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for BhcError {
    fn from(e: serde_json::Error) -> Self {
        BhcError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, BhcError>;
