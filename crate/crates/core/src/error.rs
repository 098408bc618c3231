use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate state: ket has zero norm")]
    DegenerateState,

    #[error("unsupported dimension {0}: operation is defined for qubits only")]
    UnsupportedDimension(usize),

    #[error("dimension {requested} exceeds capacity {cap}")]
    Capacity { requested: usize, cap: usize },

    #[error("kernel is not real-symmetric; the quadrature unravelling needs components in (+omega, -omega) pairs")]
    KernelNotReal,

    #[error("unsupported order {order} for the {unravelling} unravelling (max {max})")]
    UnsupportedOrder {
        order: usize,
        unravelling: &'static str,
        max: usize,
    },

    #[error("trajectory failed at t = {t}: {reason}")]
    TrajectoryFailure { t: f64, reason: String },

    #[error("Fock truncation too small: top-level population {population:.3e} at t = {t}; try nmax >= {suggested}")]
    Truncation {
        t: f64,
        population: f64,
        suggested: usize,
    },

    #[error("ensemble failure: {failed} of {total} trajectories failed (budget {budget}); first: {first}")]
    EnsembleFailure {
        failed: usize,
        total: usize,
        budget: usize,
        first: String,
    },

    #[error("time grids differ: {0}")]
    GridMismatch(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
