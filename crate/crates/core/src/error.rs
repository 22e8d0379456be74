use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("priority level {0} is outside [0, 1]")]
    PriorityOutOfRange(f64),
    #[error("interval endpoints ({lo}, {hi}) must lie in [0, 1]")]
    IntervalOutOfRange { lo: f64, hi: f64 },
    #[error("malformed interval: lower endpoint {lo} exceeds upper endpoint {hi}")]
    MalformedInterval { lo: f64, hi: f64 },
    #[error("cannot remove from an empty measure")]
    EmptyMeasure,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("arrival rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("conditioning set (p, 1] is empty at p = 1")]
    EmptyConditioningSet,
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("scripted draws exhausted: {0}")]
    ScriptExhausted(String),
    #[error("replication count must be at least 1")]
    NoReplications,
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("trace has no PASTA snapshots")]
    NoSnapshots,
    #[error("estimate has no populated bins")]
    AllBinsEmpty,
    #[error("cannot aggregate zero estimates")]
    NothingToAggregate,
}
