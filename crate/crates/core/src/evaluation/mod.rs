//! Detection, localization and explanation scores.

mod benchmark;
mod metrics;
mod raster;
mod text;

use thiserror::Error;

pub use benchmark::{
    benchmark_from_records, evaluate, Aggregation, BenchmarkEntry, EvalOptions, EvalReport,
    ExplanationSummary, LocalizationSummary, Prediction, SampleRow,
};
pub use metrics::{
    binary_metrics, localization_metrics, BinaryScores, LocalizationScores, PixelCounts,
};
pub use raster::{
    point_in_polygon, rasterize, rasterize_all, BinaryPixelMap, Region, RegionAnnotation,
};
pub use text::{cosine, css, rouge_l, tokenize, Embedder};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("length mismatch: {0}")]
    Length(String),
    #[error("no samples")]
    Empty,
    #[error("malformed geometry: {0}")]
    Geometry(String),
    #[error("embedder: {0}")]
    Embedder(String),
    #[error("benchmark: {0}")]
    Manifest(String),
}
