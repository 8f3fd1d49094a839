use thiserror::Error;

/// Errors raised by the laboratory. Variants are split into validation
/// failures (bad input) and runtime failures by [`LabError::is_validation`].
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("{0}")]
    InvalidGamma(String),
    #[error("invalid probability {0}: must lie in [0, 1]")]
    InvalidProbability(f64),
    #[error("wrong arity: expected {expected} vertices, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("duplicate vertex {0} in edge")]
    DuplicateVertex(String),
    #[error("wrong part multiset: partite edges need exactly one vertex per part")]
    WrongPartMultiset,
    #[error("vertex {0} out of range for this model")]
    VertexOutOfRange(String),
    #[error("inadmissible edge key: {0}")]
    InadmissibleKey(String),
    #[error("{what} count {count} exceeds cap {cap}")]
    CapExceeded { what: &'static str, count: u128, cap: u128 },
    #[error("arrival policy does not match model: {0}")]
    PolicyMismatch(String),
    #[error("horizon of {0} rounds exhausted")]
    HorizonExhausted(u64),
    #[error("round {0} already has a decision")]
    AlreadyDecided(u64),
    #[error("no arrival awaiting a decision")]
    NoPendingArrival,
    #[error("round {0} still awaits a decision")]
    DecisionPending(u64),
    #[error("queried vertex {0} has not been revealed before the current round")]
    NotRevealed(String),
    #[error("wrong model: expected {expected}")]
    WrongModel { expected: &'static str },
    #[error("capacity gamma_{index} * {target} is not an integer")]
    NonIntegralCapacity { index: usize, target: u64 },
    #[error("post-mortem requested for a successful run")]
    NotAFailure,
    #[error("no untruncated waiting-time samples for increment {0}")]
    NoUntruncatedSamples(usize),
    #[error("client diverged from the base transcript at round {round} on replica {replica}")]
    NonDeterministicClient { replica: usize, round: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// True for errors caused by invalid user input rather than a failure
    /// while running.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            LabError::Io(_)
                | LabError::Csv(_)
                | LabError::Json(_)
                | LabError::NonDeterministicClient { .. }
                | LabError::HorizonExhausted(_)
        )
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
