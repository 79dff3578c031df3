use std::io;

use thiserror::Error;

use crate::augment::CandidateReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt WAV header: {0}")]
    CorruptHeader(String),

    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),

    #[error("signal too short: {len} samples, need at least {window}")]
    SignalTooShort { len: usize, window: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid analysis config: {0}")]
    InvalidConfig(String),

    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),

    #[error("no voiced frames")]
    NoVoicedFrames,

    #[error("durations sum to {got}, expected {expected} frames")]
    DurationMismatch { expected: usize, got: usize },

    #[error("pitch shift {0} ST outside the allowed range")]
    AlphaOutOfRange(f64),

    #[error("pitch track does not match signal: {0}")]
    TrackMismatch(String),

    #[error("frame counts differ: {a} vs {b}")]
    FrameCountMismatch { a: usize, b: usize },

    #[error("sample rates differ: {a} vs {b}")]
    SampleRateMismatch { a: u32, b: u32 },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("manifest is empty: {0}")]
    EmptyManifest(String),

    #[error("no candidate was accepted ({} evaluated)", .0.len())]
    EmptyResult(Box<Vec<CandidateReport>>),

    #[error("external command failed: {0}")]
    ExternalCommandFailed(String),

    #[error("model failure in epoch {epoch}: {message}")]
    ModelFailure { epoch: usize, message: String },

    #[error("malformed spectrogram file: {0}")]
    MalformedSpectrogram(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<hound::Error> for Error {
    fn from(e: hound::Error) -> Self {
        match e {
            hound::Error::IoError(io) => Error::Io(io),
            hound::Error::FormatError(msg) => Error::CorruptHeader(msg.to_string()),
            hound::Error::Unsupported => Error::UnsupportedFormat("unsupported WAV encoding".into()),
            hound::Error::TooWide => Error::UnsupportedFormat("sample width exceeds 16 bits".into()),
            other => Error::CorruptHeader(other.to_string()),
        }
    }
}
