use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} is outside the representable fixed-point range")]
    MagnitudeOverflow { value: f64 },

    #[error("value {value} at row {row}, column {col} is outside the representable fixed-point range")]
    CellOverflow { row: usize, col: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shares belong to different sessions ({0} vs {1})")]
    SessionMismatch(u32, u32),

    #[error("shares must come from opposite parties, both are from party {0}")]
    PartyMismatch(u8),

    #[error("beaver triple {0} was already consumed")]
    TripleReuse(u64),

    #[error("round desync: expected round {expected}, received {received}")]
    RoundDesync { expected: u32, received: u32 },

    #[error("correlated randomness exhausted: needed {needed} {kind}, {available} available")]
    Exhausted {
        kind: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("configuration mismatch on key `{key}`: local {local:?}, peer {peer:?}")]
    ConfigMismatch {
        key: String,
        local: String,
        peer: String,
    },

    #[error("could not reach {addr} within {millis} ms")]
    ConnectTimeout { addr: String, millis: u64 },

    #[error("malformed frame: {0}")]
    Frame(String),

    #[error("peer closed the connection")]
    Disconnected,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("label {value} at line {line} is not 0 or 1")]
    LabelDomain { line: usize, value: String },

    #[error("invalid partition plan: {0}")]
    PlanInvalid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("baseline requires horizontally partitioned owners with identical feature sets")]
    VerticalUnsupported,

    #[error("training diverged: non-finite weight at epoch {epoch}")]
    NonFinite { epoch: usize },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
