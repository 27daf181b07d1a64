use thiserror::Error;

/// Errors raised by the accounting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidPmf(String),

    #[error("invalid database model: {0}")]
    InvalidModel(String),

    #[error("position {position} out of range for a database of size {size}")]
    PositionOutOfRange { position: usize, size: usize },

    #[error("value {0} is not in the entry support")]
    ValueOutsideSupport(f64),

    #[error("position {0} is already fixed")]
    AlreadyFixed(usize),

    #[error("enumeration of {states} states exceeds the budget of {budget}")]
    BudgetExceeded { states: u128, budget: u64 },

    #[error("epsilon must be a finite nonnegative number, got {0}")]
    NegativeEpsilon(f64),

    #[error("rate must lie in {expected}, got {value}")]
    InvalidRate { value: f64, expected: &'static str },

    #[error("invalid sizes: {0}")]
    InvalidSize(String),

    #[error("answer {0} lies outside both supports")]
    AnswerOutsideSupport(f64),

    #[error("conditioning event has zero probability")]
    ZeroProbabilityEvent,

    #[error("denominator is zero: {0}")]
    ZeroDenominator(String),

    #[error("infeasible coupling: {0}")]
    InfeasibleCoupling(String),

    #[error("distribution is not samplable for this query: positive set {positive_set:?} at epsilon {epsilon} is not a half-line (gap at {outcome})")]
    NotSamplable {
        epsilon: f64,
        outcome: f64,
        positive_set: Vec<f64>,
    },

    #[error("privacy curve has no value at epsilon {0} (outside the grid)")]
    CurveDomain(f64),

    #[error("union support has {size} outcomes, the limit is {limit}")]
    SupportTooLarge { size: usize, limit: usize },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid trade-off function: {0}")]
    InvalidTradeoff(String),

    #[error("query {0} requires a monotone query")]
    NotMonotone(String),
}

pub type Result<T> = std::result::Result<T, Error>;
