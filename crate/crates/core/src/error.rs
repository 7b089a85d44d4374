use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-unique steady state: null space dimension {dimension}")]
    NonUniqueSteadyState { dimension: usize },

    #[error("steady-state residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("quadrature did not converge: error estimate {estimate:.3e} after {intervals} intervals (target {target:.3e})")]
    Quadrature {
        estimate: f64,
        target: f64,
        intervals: usize,
    },

    #[error("indeterminate angle: both difference signals below floor {floor:.3e}")]
    IndeterminateAngle { floor: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Io(_) => 1,
            Error::NonUniqueSteadyState { .. }
            | Error::Residual { .. }
            | Error::Quadrature { .. }
            | Error::IndeterminateAngle { .. } => 2,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::NonUniqueSteadyState { .. } => "non_unique_steady_state",
            Error::Residual { .. } => "residual",
            Error::Quadrature { .. } => "quadrature",
            Error::IndeterminateAngle { .. } => "indeterminate_angle",
            Error::Io(_) => "io",
        }
    }
}
