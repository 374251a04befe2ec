use thiserror::Error;

/// Errors surfaced by the control library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian: ||M - M'|| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("matrix is not unitary: ||U'U - I|| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotUnitary { deviation: f64, tolerance: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(
        "identity-root search exhausted {restarts} restarts; best purity reached {best_purity}"
    )]
    RootSearchFailed { restarts: u32, best_purity: f64 },

    #[error("Newton refinement did not converge: {0}")]
    NonConvergence(String),

    #[error("synthesis failed: {0}")]
    SynthesisFailed(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
