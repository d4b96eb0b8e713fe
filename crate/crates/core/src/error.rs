//! Crate-wide error type.

/// Errors surfaced by the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration violated one of its documented invariants.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Peak SNR is only defined when all nodes share the same average gain.
    #[error("psnr undefined for unequal gains")]
    PsnrUndefined,

    /// Every node reported a zero message norm, so no power scaling exists.
    #[error("degenerate all-zero round")]
    DegenerateAllZeroRound,

    /// Channel inversion is impossible against a zero instantaneous gain.
    #[error("singular channel: node {0} has h = 0")]
    SingularChannel(usize),

    /// Kernel matrix stayed non-positive-definite through the jitter ladder.
    #[error("kernel matrix not PD")]
    KernelNotPd,

    /// Hyperparameter fit started from a point with non-finite likelihood.
    #[error("bad initialization: log-marginal likelihood is not finite")]
    BadInitialization,

    /// A dataset is too small to be partitioned as requested.
    #[error("too few samples: {have} for {need} parts")]
    TooFewSamples { have: usize, need: usize },

    /// Path-loss evaluation at the transmitter location itself.
    #[error("singular distance: location coincides with the transmitter")]
    SingularDistance,

    /// Shadowing covariance stayed non-PSD through the jitter ladder.
    #[error("shadowing covariance factorization failed")]
    CovarianceNotPsd,

    /// Mismatched vector/matrix dimensions between related arguments.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// File-system failure, annotated with the offending path.
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Experiment or FL configuration file could not be parsed.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// IDX dataset file is malformed.
    #[error("bad idx file: {0}")]
    BadIdx(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
