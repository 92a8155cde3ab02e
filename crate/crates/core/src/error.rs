use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeomError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("no mode set with at most {k_max} modes reaches the tolerance; best relative residual {best_residual:.3e} at K = {best_k}")]
    FitFailed {
        k_max: usize,
        best_k: usize,
        best_residual: f64,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Counts are ADOs from the index set and bytes from a configured run.
    #[error("hierarchy size {needed} exceeds the budget of {budget}")]
    ResourceLimit { needed: u128, budget: u128 },

    #[error("non-finite value in ADO {ado} at t = {t}")]
    NonFinite { ado: usize, t: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("snapshot does not match the requested run: {0}")]
    SnapshotMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HeomError>;
