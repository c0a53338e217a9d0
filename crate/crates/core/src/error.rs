use thiserror::Error;

/// Errors produced by the consensus toolkit.
#[derive(Debug, Error)]
pub enum FdcError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("node {node} is not a valid core node (network has {node_count} nodes)")]
    NodeOutOfRange { node: usize, node_count: usize },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("missing weight for {0}")]
    MissingWeight(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver did not converge (residual {residual:e})")]
    ConvergenceFailure { residual: f64 },

    #[error("not the spectrum of a stochastic matrix: top eigenvalue {0}")]
    NotStochasticSpectrum(f64),

    #[error("unsupported branch kind: {0}")]
    UnsupportedKind(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FdcError>;
