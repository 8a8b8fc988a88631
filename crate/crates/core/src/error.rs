use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("matrix is not Hurwitz: eigenvalue with real part {real_part:e}")]
    NotHurwitz { real_part: f64 },
    #[error("matrix is not symmetric positive definite ({0})")]
    NotPositiveDefinite(&'static str),
    #[error("pair (A, B) is not stabilizable: mode {re:+.6}{im:+.6}i is uncontrollable")]
    NotStabilizable { re: f64, im: f64 },
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("DC gain matrix is singular (smallest singular value {sigma_min:e})")]
    SingularDCGain { sigma_min: f64 },
    #[error("parameter entry ({row}, {col}) = {value} is outside [{lower}, {upper}]")]
    OutOfBounds {
        row: usize,
        col: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("step {step} exceeds the delay grid spacing {max}")]
    StepTooLarge { step: f64, max: f64 },
    #[error("non-finite value in `{signal}` at t = {time}")]
    NonFiniteState { time: f64, signal: String },
    #[error("`{signal}` diverged at t = {time}: |value| = {value:e} exceeds cap {cap:e}")]
    Diverged {
        time: f64,
        signal: String,
        value: f64,
        cap: f64,
    },
    #[error("time {time} is outside the logged range [{start}, {end}]")]
    RangeNotLogged { time: f64, start: f64, end: f64 },
    #[error("metrics window [{start}, {end}] contains no samples")]
    EmptyWindow { start: f64, end: f64 },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn dims(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True for failures that mean the closed loop blew up rather than
    /// that the inputs were wrong.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::NonFiniteState { .. } | Error::Diverged { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
