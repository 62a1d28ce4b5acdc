use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("region {0} has empty intersection with the mesh")]
    EmptyRegion(String),

    #[error("region {region} leaves the mesh domain of radius {domain_radius}")]
    RegionOutsideDomain { region: String, domain_radius: f64 },

    #[error("radius {radius} is under-resolved: local element size {local_size} (need radius >= {factor} x size)")]
    Resolution {
        radius: f64,
        local_size: f64,
        factor: f64,
    },

    #[error("iterative solver did not reach relative residual {tol:e} within {iterations} iterations (residual {residual:e})")]
    SolverDivergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("field is nonzero on boundary node {node} (value {value})")]
    Trace { node: usize, value: f64 },

    #[error("infeasible chain geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("field does not belong to this mesh (expected {expected}, got {found})")]
    MeshMismatch { expected: String, found: String },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
