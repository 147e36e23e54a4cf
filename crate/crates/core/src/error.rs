use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants are grouped by the layer that produces them; the CLI maps them
/// onto process exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular projector: vector is lightlike or zero (g(Z,Z) = {0:e})")]
    SingularProjector(f64),
    #[error("matrix is not in the conformal group (residual {0:e})")]
    NotInGroup(f64),

    #[error("event {coords:?} lies outside chart '{chart}'")]
    OutOfChart { chart: String, coords: [f64; 4] },
    #[error("degenerate metric at {0:?}")]
    DegenerateMetric([f64; 4]),

    #[error("integration left the chart domain before the first step")]
    EmptySolution,
    #[error("step size underflow at parameter {0}")]
    Stiffness(f64),
    #[error("geodesic leaves the chart before s = 1 (reached s = {0})")]
    NotInExpDomain(f64),
    #[error("past lightlike direction does not reach s = 1 inside the chart (reached s = {0})")]
    UnreachableDirection(f64),
    #[error("parameter {value} outside curve interval [{lo}, {hi}]")]
    OutsideInterval { value: f64, lo: f64, hi: f64 },

    #[error("observer map Jacobian is singular (condition number {0:e})")]
    CriticalPoint(f64),
    #[error("ill-posed force: time-component denominator {0:e} is too small")]
    IllPosedForce(f64),
    #[error("superluminal or degenerate relative velocity (radicand {0:e})")]
    Superluminal(f64),
    #[error("series is not invertible: zeroth coefficient vanishes")]
    NonInvertible,
    #[error("signature error: alpha_00 = {0} is not positive")]
    Signature(f64),

    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
