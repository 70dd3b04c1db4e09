use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension {0}: need d >= 2")]
    InvalidDimension(usize),

    #[error("index out of range: {what} = {value}, must be < {bound}")]
    IndexOutOfRange {
        what: &'static str,
        value: usize,
        bound: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not Bell-diagonal: largest off-diagonal Bell element {max_offdiag:.3e}")]
    NotBellDiagonal { max_offdiag: f64 },

    #[error("invalid Bell coefficients: {0}")]
    InvalidLambda(String),

    #[error("probability out of range: {name} = {value}")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("invalid basis count m = {m} for d = {d}: need 2 <= m <= d + 1")]
    InvalidBasisCount { d: usize, m: usize },

    #[error(
        "m = {m} bases are not guaranteed to be mutually unbiased for d = {d}; \
         pass an explicit opt-in to compute anyway"
    )]
    UnguaranteedBases { d: usize, m: usize },

    #[error("infeasible error rates: {0}")]
    InfeasibleRates(String),

    #[error("no feasible root of the eta condition in [0, {eta_max:e}]")]
    NoFeasibleRoot { eta_max: f64 },

    #[error("constraints admit no nonnegative normalized solution: {0}")]
    InfeasibleConstraints(String),

    #[error("optimizer did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("the {bound} bound does not support m = {m}")]
    UnsupportedBound { bound: &'static str, m: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
