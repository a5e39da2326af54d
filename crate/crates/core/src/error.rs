use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("kernel evaluated at a singular point (lattice image at distance 0)")]
    SingularPoint,
    #[error("singular configuration: {0}")]
    SingularConfiguration(String),
    #[error("set has zero volume")]
    ZeroVolume,
    #[error("empty set")]
    EmptySet,
    #[error("voxel box too small: side {side} cannot hold radius {radius}")]
    BoxTooSmall { side: f64, radius: f64 },
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("Monte Carlo cap bias {bias:.3e} exceeds standard error {stderr:.3e}")]
    CapBiasDominant { bias: f64, stderr: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from the
    /// caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence(_) | Error::CapBiasDominant { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
