use thiserror::Error;

/// Failures reported by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("curve is not certified simple (xi = {xi:.3e} <= 0)")]
    Uncertified { xi: f64 },

    #[error("point {re} + {im}i lies within tolerance of the boundary polyline")]
    BoundaryAmbiguous { re: f64, im: f64 },

    #[error("grid of {nodes} nodes cannot resolve degree {degree} (need at least {required})")]
    GridTooSmall {
        nodes: usize,
        degree: usize,
        required: usize,
    },

    #[error("precision failure: {0}")]
    Precision(String),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("block system is near-singular (|k| = {modulus})")]
    NearSingular { modulus: f64 },

    #[error("moments outside the supported regime: {0}")]
    OutOfRegime(String),

    #[error(
        "breakdown{}: xi = {xi:.3e}, curve is no longer certified simple",
        .s.map(|s| format!(" at s = {s}")).unwrap_or_default()
    )]
    Breakdown { s: Option<f64>, xi: f64 },

    #[error("point is too deep inside the curve for the Riemann map inverse (max |w| = {max_modulus})")]
    OutsideAnalyticity { max_modulus: f64 },

    #[error("ambiguous branch: {count} preimages lie on or outside the unit circle")]
    BranchAmbiguity { count: usize },

    #[error("decomposition undefined: a1 = 0")]
    DecompositionUndefined,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for invalid input, 3 for numerical failure, 4 for breakdown.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Precision(_) | Error::NoConvergence { .. } | Error::NearSingular { .. } => 3,
            Error::Breakdown { .. } => 4,
            _ => 2,
        }
    }
}
