use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("negative edge weight {value} in row {row}")]
    NegativeWeight { row: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty label set")]
    EmptyLabelSet,
    #[error("need at least 2 labeled nodes, got {0}")]
    TooFewLabels(usize),
    #[error("entropy target {target} outside (0, {max}]")]
    InvalidTarget { target: f64, max: f64 },
    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("non-finite loss at batch {0}")]
    NonFiniteLoss(usize),
    #[error("channel mismatch: model expects {model:?}, got {config:?}")]
    ChannelMismatch { model: Vec<String>, config: Vec<String> },
    #[error("split `{0}` is empty")]
    EmptySplit(&'static str),
    #[error("model format version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model checksum mismatch")]
    ChecksumMismatch,
    #[error("malformed model: {0}")]
    MalformedModel(String),
}
