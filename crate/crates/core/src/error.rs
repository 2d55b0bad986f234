use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("duplicate timestamp t={t} for id {id:?} at line {line}")]
    DuplicateTimestamp { id: String, t: f64, line: u64 },

    #[error("query time {t} outside track range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("unknown entity id {0:?}")]
    UnknownEntity(String),

    #[error("missing action for label {0}")]
    MissingAction(usize),

    #[error("non-finite action for label {0}")]
    InvalidAction(usize),

    #[error("episode finished at step {0}")]
    EpisodeFinished(usize),

    #[error("degenerate camera: {0}")]
    DegenerateCamera(&'static str),

    #[error("point is behind the camera")]
    BehindCamera,

    #[error("observation invalid for label {0}: entity not projectable")]
    ObservationInvalid(usize),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("policy produced non-finite output")]
    PolicyCorruption,

    #[error("bad checkpoint magic")]
    CheckpointMagic,

    #[error("checkpoint format version {found} cannot be read by this build (expects {expected}); re-export the checkpoint with a matching version")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("incompatible checkpoint: architecture fingerprint mismatch")]
    CheckpointFingerprint,

    #[error("malformed checkpoint: {0}")]
    CheckpointFormat(String),

    #[error("zero steps accumulated")]
    ZeroSteps,

    #[error("usage: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Process exit code: 1 usage, 2 data, 3 numerical divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::InvalidParameter(_) => 1,
            Error::Divergence(_) | Error::PolicyCorruption => 3,
            _ => 2,
        }
    }
}
