use thiserror::Error;

/// Errors surfaced by the enhancement engine.
#[derive(Debug, Error)]
pub enum DepseError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("time {t} outside [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("non-finite value in {context} (step {step:?})")]
    NonFinite {
        context: &'static str,
        step: Option<usize>,
    },

    #[error("mixture has no components")]
    EmptyMixture,

    #[error("training loss diverged at update {update} (time index {time_index}): {loss}")]
    DivergentLoss {
        update: usize,
        time_index: usize,
        loss: f64,
    },

    #[error("wire protocol violation: {0}")]
    Protocol(String),

    #[error("wire protocol timeout")]
    Timeout,

    #[error("score server reported error code {0}")]
    RemoteError(u32),

    #[error("wav format: {0}")]
    WavFormat(String),

    #[error("sample rate {got} Hz unsupported (expected {expected} Hz); resampling is not performed")]
    WrongSampleRate { expected: u32, got: u32 },

    #[error("expected mono audio, got {0} channels")]
    Multichannel(u16),

    #[error("signal is silent")]
    SilentSignal,

    #[error("reference and noise are collinear")]
    CollinearReferences,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DepseError>;
