use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum VadError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode audio {path}: {reason}")]
    AudioDecode { path: PathBuf, reason: String },

    #[error("multi-channel unsupported ({channels} channels)")]
    MultiChannel { channels: u16 },

    #[error("sample rate mismatch: file is {found} Hz, expected {expected} Hz (enable resampling)")]
    RateMismatch { found: u32, expected: u32 },

    #[error("invalid audio signal: {0}")]
    InvalidSignal(String),

    #[error("signal too short: {len} samples, frame length {frame_length}")]
    SignalTooShort { len: usize, frame_length: usize },

    #[error("no speech content: clean signal has zero energy")]
    NoSpeechContent,

    #[error("impossible SNR: {0}")]
    ImpossibleSnr(String),

    #[error("transient of {transient} samples longer than signal of {signal} samples")]
    TransientTooLong { transient: usize, signal: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("degenerate geometry: all points identical")]
    DegenerateGeometry,

    #[error("graph is disconnected ({components} components): increase k or data too fragmented")]
    DisconnectedGraph { components: usize },

    #[error("eigensolver failed: {0}")]
    EigensolverFailed(String),

    #[error("extension ill-conditioned: eigenvalue {index} is {value:e}")]
    IllConditionedExtension { index: usize, value: f64 },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("single-class input: {0}")]
    SingleClass(String),

    #[error("mode mismatch: expected {expected}, got {found}")]
    ModeMismatch {
        expected: String,
        found: String,
    },

    #[error("infeasible grid cell (fraction {fraction}, ratio {ratio}): {reason}")]
    InfeasibleCell {
        fraction: f64,
        ratio: f64,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("not a bundle: bad magic bytes")]
    NotABundle,

    #[error("unsupported bundle version {found} (this build supports version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("corrupt bundle: {0}")]
    CorruptBundle(String),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<VadError>,
    },
}

impl VadError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VadError::Io {
            path: path.into(),
            source,
        }
    }

    /// Attributes an error to a named pipeline stage.
    pub fn in_stage(self, stage: &'static str) -> Self {
        VadError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Whether the failure stems from bad input or configuration rather than
    /// an internal numerical failure.
    pub fn is_data_error(&self) -> bool {
        match self {
            VadError::Stage { source, .. } => source.is_data_error(),
            VadError::EigensolverFailed(_) | VadError::Diverged(_) => false,
            _ => true,
        }
    }
}

pub type Result<T, E = VadError> = std::result::Result<T, E>;
