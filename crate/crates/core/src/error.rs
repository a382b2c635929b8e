use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed audio: {0}")]
    Format(String),
    #[error("unsupported audio encoding: {0}")]
    Unsupported(String),
    #[error("insufficient audio: {0}")]
    InsufficientAudio(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("input is silent")]
    Silence,
    #[error("frequency not on grid: {0}")]
    Grid(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("model corrupt: {0}")]
    ModelCorrupt(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("subject ids do not match: {0}")]
    Join(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
