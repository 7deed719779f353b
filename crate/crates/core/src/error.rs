use thiserror::Error;

use rtw_autodiff::AutodiffError;

#[derive(Debug, Error)]
pub enum RtwError {
    #[error("{0}: non-finite value")]
    NonFinite(&'static str),
    #[error("manifolds: matrix is not symmetric positive definite")]
    NotSpd,
    #[error("manifolds: points are antipodal, logarithm undefined")]
    AntipodalPoint,
    #[error("manifolds: cannot project a zero vector onto the sphere")]
    ZeroVector,
    #[error("manifolds: expected {expected} coordinates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("barycenter: no convergence after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("{module}: bad configuration: {msg}")]
    BadConfig { module: &'static str, msg: String },
    #[error("baselines: lattice too large ({nodes} nodes for {signals} signals)")]
    TooLarge { signals: usize, nodes: f64 },
    #[error("datasets: warp rejection sampling exhausted after {0} attempts")]
    RejectionExhausted(usize),
    #[error("datasets: parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("datasets: manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("align: training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("autodiff: {0}")]
    Autodiff(#[from] AutodiffError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl RtwError {
    pub fn config(module: &'static str, msg: impl Into<String>) -> Self {
        RtwError::BadConfig { module, msg: msg.into() }
    }

    /// Whether the error stems from the inputs or configuration rather than from numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            RtwError::BadConfig { .. }
                | RtwError::TooLarge { .. }
                | RtwError::Parse { .. }
                | RtwError::ManifestMismatch(_)
                | RtwError::DimensionMismatch { .. }
                | RtwError::Io(_)
                | RtwError::Json(_)
        )
    }
}

pub type Result<T, E = RtwError> = std::result::Result<T, E>;
