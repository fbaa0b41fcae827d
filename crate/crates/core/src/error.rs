use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: String },

    #[error("line {line}: duplicate edge ({u}, {v})")]
    DuplicateEdge { line: usize, u: String, v: String },

    #[error("line {line}: weight {weight} outside [0, 1]")]
    WeightOutOfRange { line: usize, weight: f64 },

    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("graph is empty")]
    EmptyGraph,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no connected graph after {attempts} attempts")]
    RetryBudgetExhausted { attempts: usize },

    #[error("power iteration did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("budget {k} exceeds node count {n}")]
    BudgetTooLarge { k: usize, n: usize },

    #[error("{count} candidates exceed the limit of {limit}")]
    TooManyCandidates { count: usize, limit: usize },

    #[error("{edges} uncertain edges exceed the enumeration budget of {limit}")]
    EdgeBudgetExceeded { edges: usize, limit: usize },

    #[error("graph with {n} nodes exceeds the dense cap of {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("variance of the spread table is zero; index undefined")]
    ZeroVariance,

    #[error("rounds ledger mismatch: recorded {recorded}, expected {expected}")]
    LedgerMismatch { recorded: u64, expected: u64 },

    #[error("unknown heuristic `{0}`")]
    UnknownHeuristic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// True for failures caused by a degenerate numerical setting rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::ZeroVariance | Error::NotConverged { .. })
    }
}
