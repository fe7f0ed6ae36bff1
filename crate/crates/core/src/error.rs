use crate::geometry::GeometryError;
use crate::kernels::KernelError;
use crate::quadrature::QuadratureError;
use thiserror::Error;

/// Error type for the potential, moving-plane and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no critical plane position found in direction {direction:?} before {lambda_max}")]
    NoEvent { direction: Vec<f64>, lambda_max: f64 },
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
