use thiserror::Error;

/// Errors raised by the geometry, projection and measure routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("vector norm {norm:e} is below the zero tolerance")]
    ZeroVector { norm: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid norm specification: {0}")]
    InvalidNorm(String),

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point is not on the Wulff shape (dual norm {dual_value})")]
    NotOnWulff { dual_value: f64 },

    #[error("polytope is unbounded")]
    Unbounded,

    #[error("query point lies inside the body")]
    InsideBody,

    #[error("projection is not unique at the query point")]
    AmbiguousProjection,

    #[error("ill-conditioned curvature estimate (residual {residual:e})")]
    IllConditioned { residual: f64 },

    #[error("direction is not a normal direction at the boundary point (defect {defect:e})")]
    NotNormalDirection { defect: f64 },

    #[error("operation requires a smooth body (ellipsoid or Wulff body)")]
    NotSmoothVariant,

    #[error("operation requires a two-dimensional polytope")]
    NotPolygon,

    #[error("Steiner design matrix is singular or ill-conditioned")]
    SingularDesign,

    #[error("body is not mean-convex: first mean curvature {value:e} at a quadrature node")]
    NonMeanConvex { value: f64 },

    #[error("Monte-Carlo error {error:e} exceeds the allowed {allowed:e}")]
    InsufficientSamples { error: f64, allowed: f64 },
}

pub type Result<T> = std::result::Result<T, GeomError>;
