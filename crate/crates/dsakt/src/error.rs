use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the subsystem that raises
/// them; the CLI maps them onto process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    // data ingestion
    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("need at least 2 users to split, got {0}")]
    TooFewUsers(usize),
    #[error("unknown exercise id `{0}`")]
    UnknownExercise(String),
    #[error("exercise index {index} out of range [1, {max}]")]
    ExerciseOutOfRange { index: u32, max: u32 },
    #[error("token {token} out of range [0, {max}]")]
    TokenOutOfRange { token: u32, max: u32 },
    #[error("invalid probability {name}={value}; must lie in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("skill model not identifiable: p_guess={guess} >= 1 - p_slip={slip}")]
    UnidentifiableSkill { guess: f64, slip: f64 },

    // numeric kernels
    #[error("shape mismatch in {op}: left {left:?}, right {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("softmax row {row} is fully masked; cannot normalize")]
    FullyMaskedRow { row: usize },
    #[error("loss has no valid positions")]
    NoValidPositions,
    #[error("non-finite value in parameter `{0}`")]
    NonFinite(String),

    // model / checkpoint
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("bad checkpoint magic/version: {0}")]
    CheckpointMagic(String),
    #[error("checkpoint shape mismatch for `{name}`: header {header:?}, expected {expected:?}")]
    CheckpointShape {
        name: String,
        header: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("checkpoint truncated: {0}")]
    CheckpointTruncated(String),

    // training / evaluation
    #[error("learning-rate schedule requires step >= 1")]
    ZeroStep,
    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("AUC needs scores from both classes (got a single class)")]
    SingleClass,
    #[error("AUC needs at least 2 scored positions, got {0}")]
    TooFewScores(usize),

    // plumbing
    #[error("invalid run config: {0}")]
    RunConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
