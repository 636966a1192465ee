//! Clip ingestion, K-means keyframe clustering and low-motion filtering.

mod clip;
pub mod fixtures;
mod keyframes;
mod kmeans;

pub use clip::{
    load_clip, load_manifest, save_clip, write_manifest, BitDepth, ClipManifestEntry,
    DiagnosticLabel, TaskLabel, UtiClip,
};
pub use keyframes::{dynamic_variance_filter, frame_dynamic_variances, select_keyframes};
pub use kmeans::{default_cluster_count, kmeans_frames, kmeans_frames_restarts, Clustering, KMeansOptions};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("frame file not found: {0}")]
    MissingFile(PathBuf),
    #[error("clip {clip_id} has no frames")]
    EmptyClip { clip_id: String },
    #[error("frame {path} is {got_h}x{got_w}, expected {want_h}x{want_w}")]
    DimensionMismatch {
        path: PathBuf,
        want_h: usize,
        want_w: usize,
        got_h: usize,
        got_w: usize,
    },
    #[error("frame {path} is not an 8- or 16-bit grayscale PNG ({detail})")]
    UnsupportedFormat { path: PathBuf, detail: String },
    #[error("invalid manifest entry: {0}")]
    Manifest(String),
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("cluster count k={k} must satisfy 1 <= k <= {frames}")]
    InvalidClusterCount { k: usize, frames: usize },
    #[error("percentile {0} outside [0, 1]")]
    InvalidPercentile(f64),
    #[error("clustering covers {clustering} frames but the clip has {clip}")]
    ClusteringMismatch { clustering: usize, clip: usize },
    #[error("png decode error in {path}: {source}")]
    PngDecode {
        path: PathBuf,
        #[source]
        source: png::DecodingError,
    },
    #[error("png encode error: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("glob pattern error: {0}")]
    Glob(#[from] glob::PatternError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
