use thiserror::Error;

/// Errors raised by distribution queries, mechanisms and oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("value {value} is outside the support [{lo}, {hi}]")]
    OutsideSupport { value: f64, lo: f64, hi: f64 },

    #[error("hazard rate undefined at {0}: no mass at or above this point")]
    HazardUndefined(f64),

    #[error("no probability mass above {0}")]
    EmptyTail(f64),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("profile has {got} entries, instance has {expected} agents")]
    ProfileMismatch { expected: usize, got: usize },

    #[error("malformed profile: {0}")]
    MalformedProfile(String),

    #[error("{mechanism} requires {required} budgets")]
    BudgetModeMismatch {
        mechanism: String,
        required: &'static str,
    },

    #[error("value distribution of agent {0} is not MHR")]
    NotMhr(usize),

    #[error("instance too large for the oracle: {profiles} profiles exceeds the cap of {cap}")]
    OracleTooLarge { profiles: usize, cap: usize },

    #[error("linear program is malformed: {0}")]
    MalformedLp(String),

    #[error("simplex did not converge within {0} pivots")]
    IterationLimit(usize),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
