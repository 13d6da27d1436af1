use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("non-finite value at index {0}")]
    NonFiniteValues(usize),
    #[error("missing view {0}")]
    MissingView(i32),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid layer count {0} (must be >= 1)")]
    InvalidLayerCount(usize),
    #[error("layer {layer} out of range 1..={layer_count}")]
    LayerOutOfRange { layer: usize, layer_count: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("image with {pixels} pixels is smaller than superpixel size {target_size}")]
    ImageTooSmall { pixels: usize, target_size: usize },
    #[error("label map has no known (non-zero) labels")]
    NoKnownLabels,
    #[error("image has no valid pixels to fill from")]
    NoValidPixels,
    #[error("label map still contains ambiguous (zero) labels")]
    UnfilledLabels,
    #[error("patch size {size} exceeds tensor extent {width}x{height}")]
    PatchTooLarge {
        size: usize,
        width: usize,
        height: usize,
    },
    #[error("corrupt tensor header: {0}")]
    CorruptHeader(String),
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    ImageSmallerThanWindow {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
