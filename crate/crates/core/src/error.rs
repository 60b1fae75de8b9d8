use thiserror::Error;

/// Errors raised by the numerical and physical layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("singular or ill-conditioned system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("matrix exponential overflow (norm {norm:.3e}); rescale the generator")]
    ExpmOverflow { norm: f64 },

    #[error("ODE step size underflow at t = {t:.6e} (step {step:.3e}); the system is too stiff for the requested tolerance")]
    StepUnderflow { t: f64, step: f64 },

    #[error("Hermite recurrence overflow at order {order}; use the scaled variant")]
    HermiteOverflow { order: usize },

    #[error("truncated unitary defect {defect:.3e} exceeds tolerance; increase the Fock dimension (currently {dim})")]
    Truncation { defect: f64, dim: usize },

    #[error("series truncation would exceed {limit} terms; parameters are too extreme")]
    SeriesTooLong { limit: usize },

    #[error("pole of the response function hit at m = {m}")]
    Pole { m: usize },

    #[error("density matrix invariant violated: {0}")]
    InvalidState(String),

    #[error("steady state is not unique: {0}")]
    DegenerateSteadyState(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
