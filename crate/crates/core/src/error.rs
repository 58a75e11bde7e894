use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("arity {n} exceeds the cap of {cap} for {what}")]
    ArityCap { n: usize, cap: usize, what: &'static str },

    #[error("{what} requires an even arity, got {n}")]
    OddArity { n: usize, what: &'static str },

    #[error("threshold index {t} outside 0..={max}")]
    ThresholdRange { t: usize, max: usize },

    #[error("probability {0} outside [0, 1]")]
    Probability(f64),

    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),

    #[error("work budget exceeded: {required} > {budget} ({what})")]
    Budget {
        required: u128,
        budget: u128,
        what: &'static str,
    },

    #[error("domain mismatch: {0}")]
    Domain(String),

    #[error("connective is not balanced and nonlinear (a = {a})")]
    NotBalancedNonlinear { a: f64 },

    #[error("no theorem covers this process; the limit cannot be materialized")]
    UnknownLimit,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    /// True for errors caused by size caps or work budgets rather than malformed input.
    pub fn is_cap(&self) -> bool {
        matches!(self, Error::ArityCap { .. } | Error::Budget { .. })
    }
}
