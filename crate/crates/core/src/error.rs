use thiserror::Error;

/// Errors raised by the bound evaluators, the simulator and the optimizers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument fell outside the domain of the operation.
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid feedback schedule at index {index}: {reason}")]
    InvalidSchedule { index: usize, reason: String },

    #[error("invalid test parameter at phase {index}: {reason}")]
    InvalidTestParams { index: usize, reason: String },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid input distribution: {0}")]
    InvalidDistribution(String),

    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("symbol {symbol} at position {position} is outside an alphabet of size {alphabet}")]
    SymbolOutOfRange {
        position: usize,
        symbol: usize,
        alphabet: usize,
    },

    #[error("search box has {volume} points, more than the budget of {budget} evaluations")]
    BoxTooLarge { volume: u128, budget: u64 },

    #[error("invalid optimization problem: {0}")]
    InvalidProblem(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        expected,
    }
}
