use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("{what} = {value} lies outside {domain}")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("non-positive Jacobian determinant {det:.3e} in patch {patch}, element {element:?}")]
    SingularJacobian {
        patch: usize,
        element: (usize, usize),
        det: f64,
    },

    #[error("inverse mapping did not converge after {iterations} iterations (residual {residual:.3e})")]
    InverseMapFailed { iterations: usize, residual: f64 },

    #[error("patches {patch_a} and {patch_b} are not conforming: {reason}")]
    NonConforming {
        patch_a: usize,
        patch_b: usize,
        reason: String,
    },

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is singular (pivot {pivot}); {hint}")]
    Singular { pivot: usize, hint: &'static str },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("solve residual {residual:.3e} exceeds {tolerance:.1e}")]
    Inaccurate { residual: f64, tolerance: f64 },

    #[error("no admissible harmonic order up to {max_order}; try a larger max_order")]
    NoHarmonics { max_order: i32 },

    #[error("invalid harmonic set: {0}")]
    InvalidHarmonics(String),

    #[error("eigenvalue problem failed: {0}")]
    Eigen(String),

    #[error("substructuring did not converge in {iterations} iterations (last eps_rt {last_rt:.3e}, eps_st {last_st:.3e})")]
    NotConverged {
        iterations: usize,
        last_rt: f64,
        last_st: f64,
        history: Vec<(f64, f64)>,
    },

    #[error("point ({x:.6e}, {y:.6e}) lies outside every patch")]
    OutsideDomain { x: f64, y: f64 },

    #[error("invalid sample grid: {0}")]
    Sampling(String),

    #[error("total harmonic distortion undefined: fundamental is zero")]
    ZeroFundamental,

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
