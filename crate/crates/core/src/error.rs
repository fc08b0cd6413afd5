use thiserror::Error;

/// Errors raised across the tracking, planning and simulation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbtError {
    #[error("integration diverged at t = {t:.4} s (non-finite state)")]
    IntegrationDiverged { t: f64 },

    #[error("target and observer positions coincide (|q + eps| = {distance:e} m)")]
    CoincidentPosition { distance: f64 },

    #[error("pseudo-linear batch requested from an empty dataset")]
    EmptyBatch,

    #[error("prior covariance is ill-conditioned: Cholesky failed after jitter {jitter:e}")]
    IllConditionedPrior { jitter: f64 },

    #[error("optimal bearing set needs at least 3 bearings, got {0}")]
    DegenerateBearingSet(usize),

    #[error("matrix square root of a non-PSD covariance (min eigenvalue {min_eig:e})")]
    MatrixRoot { min_eig: f64 },

    #[error("sigma point within {distance:e} m of the planned AUV position")]
    NearSingularBearing { distance: f64 },

    #[error("flat-output spline system is singular")]
    SplineSolve,

    #[error("pseudo-linear Kalman filter degenerated (innovation variance {0:e})")]
    FilterDegenerate(f64),

    #[error("degenerate bearing geometry: regression normal equations are rank deficient")]
    DegenerateGeometry,

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("{context}: {message}")]
    Io { context: String, message: String },
}

pub type Result<T> = std::result::Result<T, GbtError>;
