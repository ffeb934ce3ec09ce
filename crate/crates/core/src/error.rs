use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Hamiltonian vanishes where a ratio needs it to be positive.
    #[error("Hamiltonian vanishes at y = {y}; the ratio H(x + y) / H(y) is undefined")]
    VanishingHamiltonian { y: f64 },

    /// The schedule's admissibility window is violated (scale below the admissible threshold).
    #[error("inadmissible schedule at w = {w}: {inequality}")]
    Inadmissible { w: f64, inequality: String },

    /// A state space is empty.
    #[error("empty state space: {0}")]
    EmptyStateSpace(String),

    /// An exact computation would exceed the configured state-space cap.
    #[error("state space of size {size} exceeds the cap {cap}; use MCMC sampling instead")]
    StateSpaceTooLarge { size: u128, cap: u128 },

    /// The coupled dynamics were asked to run with a Hamiltonian not declared convex.
    #[error("monotone coupling requires a convex Hamiltonian; '{0}' is not declared convex")]
    NonConvexHamiltonian(String),

    /// An order violation between coupled chains, with a JSON dump of the trace.
    #[error("coupling order violated at event {event_index}")]
    CouplingViolation { event_index: u64, trace_json: String },

    /// Mismatched sampling grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An estimator had no usable samples.
    #[error("no effective samples: {0}")]
    NoSamples(String),

    /// Unparseable catalog name or configuration value.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
