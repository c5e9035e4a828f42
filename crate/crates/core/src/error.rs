use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("unsupported bit depth: {0} bits per sample (only 8-bit images are supported)")]
    UnsupportedBitDepth(u8),

    #[error("unsupported maxval {0} (only maxval 255 is supported)")]
    UnsupportedMaxval(u32),

    #[error("malformed image data: {0}")]
    Decode(String),

    #[error("cannot encode image: {0}")]
    Encode(String),

    #[error("unknown image extension {0:?} (expected .pgm or .png)")]
    UnknownExtension(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("image dimensions must be even, got {0}x{1}")]
    OddDimensions(usize, usize),

    #[error("degenerate {0}x{1} image: {2}")]
    Degenerate(usize, usize, &'static str),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("model format version {found} is not supported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("output of {pixels} pixels exceeds the pixel budget of {budget}")]
    PixelBudget { pixels: u64, budget: u64 },

    #[error("no images found in {0}")]
    NoImages(PathBuf),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
