use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed cover: {0}")]
    MalformedCover(String),

    #[error("negative pixel {value} at index {index}; covers must be non-negative")]
    NegativePixel { index: usize, value: f32 },

    #[error("image has no pixels")]
    EmptyImage,

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("integer-sample TIFF ({bits} bits per sample); expected 32-bit IEEE float")]
    IntegerSamples { bits: u16 },

    #[error("{channels}-channel TIFF; expected a single grayscale channel")]
    MultiChannel { channels: u16 },

    #[error("lossy TIFF compression (method {0})")]
    LossyCompression(u16),

    #[error("unsupported TIFF compression (method {0})")]
    UnsupportedCompression(u16),

    #[error("unsupported sample layout: {0}")]
    UnsupportedSamples(String),

    #[error("tiff: {0}")]
    Tiff(#[from] tiff::TiffError),

    #[error("io: {0}")]
    Io(#[from] io::Error),

    #[error("tile size must be positive and fit the image (size {size}, image {width}x{height})")]
    InvalidTileSize {
        size: usize,
        width: usize,
        height: usize,
    },

    #[error("cover has n_x = 0 (zero or denormal pixel); no plane is embeddable")]
    UnsuitableCover,

    #[error("requested {requested} planes but the cover only supports n_x = {n_x}")]
    CapacityExceeded { requested: usize, n_x: usize },

    #[error("payload of {bits} bits exceeds the capacity of {capacity} bits")]
    PayloadOverflow { bits: usize, capacity: usize },

    #[error("key asks for {planes} planes but the stego only supports n_x = {n_x}")]
    KeyMismatch { planes: usize, n_x: usize },

    #[error("unknown cost model {0:?}")]
    UnknownCostModel(String),

    #[error("cost map is already corrected")]
    AlreadyCorrected,

    #[error("every cost is infinite (all pixels wet)")]
    AllWet,

    #[error("message of {bits} bits exceeds the entropy capacity of {max} bits")]
    EntropyCapacity { bits: usize, max: usize },

    #[error("lambda search did not reach the entropy target (got {entropy}, want {target})")]
    LambdaNotConverged { entropy: f64, target: f64 },

    #[error("no trellis path satisfies the syndrome; too many wet bits")]
    StcSaturated,

    #[error("stc: {0}")]
    StcLength(String),

    #[error("invalid stc parameters: {0}")]
    InvalidCode(String),

    #[error("key file line {line}: {msg}")]
    KeyParse { line: usize, msg: String },

    #[error("invalid key: {0}")]
    InvalidKey(String),

    #[error("malformed export file: {0}")]
    MalformedExport(String),
}

impl Error {
    /// True for errors that come from asking more of a cover than it can
    /// carry (plane count, payload size, entropy budget).
    pub fn is_capacity(&self) -> bool {
        matches!(
            self,
            Error::UnsuitableCover
                | Error::CapacityExceeded { .. }
                | Error::PayloadOverflow { .. }
                | Error::KeyMismatch { .. }
                | Error::EntropyCapacity { .. }
                | Error::StcSaturated
        )
    }
}
