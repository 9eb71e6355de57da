//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the simulation, envelope, and fitting layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad argument values (non-increasing grids, empty inputs, zero counts, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Evaluation at a point where the expression is singular
    /// (PSD of a frozen fluctuator at f = 0, Larmor expansion at g = 0,
    /// coupler on resonance with the qubits).
    #[error("singular input: {0}")]
    Singular(String),

    /// Flux-sensitivity evaluation outside the operating branch
    /// (negative radicand in the closed form).
    #[error("out of operating branch: {0}")]
    OutOfBranch(String),

    /// Operation called in the wrong damping regime.
    #[error("regime error: {0}")]
    Regime(String),

    /// State-space dimension exceeds the supported bound.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Filter-function evaluation exactly at a secant pole.
    #[error("filter pole: {0}")]
    Pole(String),

    /// Spectrum needs a low-frequency cutoff for the integral to exist.
    #[error("cutoff required: {0}")]
    CutoffRequired(String),

    /// Normalized measurement undefined (no population left in the subspace).
    #[error("undefined measurement: {0}")]
    UndefinedMeasurement(String),

    /// Adaptive ODE integration failed (step-size underflow).
    #[error("stiffness: {0}")]
    Stiffness(String),

    /// Fit did not converge within its iteration budget.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Configuration file or schema problem.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            Error::Convergence(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
