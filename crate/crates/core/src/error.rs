use thiserror::Error;

/// Errors raised by graph construction, model validation, the oracles and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("agent {agent} out of range for a graph of {n} agents")]
    AgentOutOfRange { agent: usize, n: usize },

    #[error("graph is disconnected: no path between agents {0} and {1}")]
    Disconnected(usize, usize),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("component {component} has value {value} but its space has size {size}")]
    ComponentOutOfRange {
        component: usize,
        value: usize,
        size: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error(
        "oracle infeasible: {entries} table entries exceed the cap of {cap}; \
         use the Monte-Carlo estimators instead"
    )]
    OracleInfeasible { entries: u128, cap: u128 },

    #[error("non-finite advantage for agent {agent} at observation {observation}, action {action}")]
    NonFiniteAdvantage {
        agent: usize,
        observation: u128,
        action: usize,
    },

    #[error("policy parameters diverged at iteration {iteration}: agent {agent} has |theta| = {magnitude:e}")]
    Diverged {
        iteration: usize,
        agent: usize,
        magnitude: f64,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("plot: {0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
