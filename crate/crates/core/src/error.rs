use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode index {index} out of range for {n_modes}-mode state")]
    ModeOutOfRange { index: usize, n_modes: usize },

    #[error("mode count mismatch: expected {expected}, found {found}")]
    ModeCountMismatch { expected: usize, found: usize },

    #[error("matrix is not unitary: max |U^dagger U - I| = {residual:.3e}")]
    NotUnitary { residual: f64 },

    #[error("degenerate measurement: marginal variance {variance:.3e} too small to condition on")]
    DegenerateMeasurement { variance: f64 },

    #[error("circuit violates the cluster condition Im U = Adj Re U: residual {residual:.3e}")]
    InvalidCircuit { residual: f64 },

    #[error("matrix is not positive definite: leading minor {minor} has pivot {pivot:.3e}")]
    NotPositiveDefinite { minor: usize, pivot: f64 },

    #[error("decomposition failed: residual {residual:.3e}")]
    Decomposition { residual: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid protocol: {0}")]
    Protocol(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
