use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read image {path}: {source}")]
    ImageRead {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("cannot write image {path}: {source}")]
    ImageWrite {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedImage(String),
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid segment map: {0}")]
    SegmentMap(String),
    #[error("bit plane {plane} out of range 1..={bit_depth}")]
    PlaneOutOfRange { plane: usize, bit_depth: u8 },
    #[error("invalid bit planes: {0}")]
    BitPlanes(String),
    #[error("invalid importance model: {0}")]
    Importance(String),
    #[error("stream {stream}: expected {expected} bits, received {found}")]
    LengthMismatch {
        stream: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid code specification: {0}")]
    CodeSpec(String),
    #[error("unsupported modulation order {0}")]
    Modulation(u32),
    #[error("bit count {bits} is not a multiple of {bits_per_symbol} bits per symbol")]
    SymbolAlignment { bits: usize, bits_per_symbol: usize },
    #[error("BER fit failed: {0}")]
    BerFit(String),
    #[error("invalid allocation input: {0}")]
    Allocation(String),
    #[error("water level search did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid metric input: {0}")]
    Metric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
