use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension {0} is too small (need N >= 7)")]
    DimensionTooSmall(u32),
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("quadrature did not converge: estimate {value:e} with error {error:e}")]
    QuadratureFailed { value: f64, error: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("basis is numerically degenerate (Gram condition {0:e})")]
    DegenerateBasis(f64),
    #[error("invalid tower configuration: {0}")]
    ConfigurationInvalid(String),
    #[error("mesh does not resolve scale {scale:e} (smallest positive node {node:e})")]
    MeshUnresolved { scale: f64, node: f64 },
    #[error("Newton iteration diverged after {iterations} steps (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("constraint system is singular")]
    ConstraintSingular,
    #[error("no minimizer bracketed: {0}")]
    MinimizerNotFound(String),
    #[error("radius {radius} lies outside the domain of radius {domain}")]
    RadiusOutsideDomain { radius: f64, domain: f64 },
    #[error("concentration fit is degenerate: {0}")]
    FitDegenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
