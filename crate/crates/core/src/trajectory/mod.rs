//! Tongue-movement trajectories: region ordering, the reference tracker,
//! unit-space normalization and the motion amplitude filter.

mod amplitude;
mod io;
mod normalize;
mod region;
mod tracker;

pub use amplitude::{amplitude_filter, max_displacement, AmplitudeDecision};
pub use io::{read_trajectory_file, to_fixed_json, write_trajectory_file, FixedDecimalFormatter, TrajectoryFile};
pub use normalize::{denormalize_trajectory, normalize_trajectory, AxisRange};
pub use region::{validate_region_order, Region, RegionAnnotation, RegionOrder};
pub use tracker::{
    default_columns, reference_track, ExternalCommandTracker, ReferenceTracker, TrackerConfig,
    TrackerOutput, TrajectoryExtractor,
};

use serde::{Deserialize, Serialize};

/// `(x, y)` in pixels or unit space.
pub type Point = [f64; 2];

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("trajectory has no frames")]
    EmptyTrajectory,
    #[error("region {0} has no points")]
    EmptyRegion(usize),
    #[error("scan column {column} outside frame width {width}")]
    ColumnOutOfRange { column: usize, width: usize },
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
    #[error("expected a trajectory in {expected:?} space")]
    WrongSpace { expected: CoordinateSpace },
    #[error("frame {frame} has {got} points, expected {expected}")]
    PointCountMismatch { frame: usize, expected: usize, got: usize },
    #[error("amplitude threshold must be >= 0, got {0}")]
    NegativeThreshold(f64),
    #[error("external tracker failed: {0}")]
    External(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateSpace {
    RawPixels,
    UnitNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    Manual,
    ReferenceTracker,
    ExternalModel,
}

/// Per-frame key points, `3 * points_per_region` per frame ordered tip, body,
/// root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySequence {
    pub frames: Vec<Vec<Point>>,
    pub points_per_region: usize,
    pub space: CoordinateSpace,
    pub source: TrajectorySource,
    /// Set when an axis had zero range during normalization (mapped to 0.5).
    #[serde(default)]
    pub degenerate_axes: [bool; 2],
    /// Per-axis `(min, max)` used to normalize, kept for denormalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<[AxisRange; 2]>,
}

impl TrajectorySequence {
    pub fn new(
        frames: Vec<Vec<Point>>,
        points_per_region: usize,
        space: CoordinateSpace,
        source: TrajectorySource,
    ) -> Result<Self, TrajectoryError> {
        let seq = TrajectorySequence {
            frames,
            points_per_region,
            space,
            source,
            degenerate_axes: [false; 2],
            normalization: None,
        };
        seq.check_shape()?;
        Ok(seq)
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn points_per_frame(&self) -> usize {
        3 * self.points_per_region
    }

    pub fn check_shape(&self) -> Result<(), TrajectoryError> {
        if self.frames.is_empty() {
            return Err(TrajectoryError::EmptyTrajectory);
        }
        if self.points_per_region == 0 {
            return Err(TrajectoryError::EmptyRegion(1));
        }
        let expected = self.points_per_frame();
        for (frame, pts) in self.frames.iter().enumerate() {
            if pts.len() != expected {
                return Err(TrajectoryError::PointCountMismatch { frame, expected, got: pts.len() });
            }
        }
        Ok(())
    }

    /// Region grouping of one frame.
    pub fn annotation(&self, frame_index: usize) -> RegionAnnotation {
        let p = self.points_per_region;
        let pts = &self.frames[frame_index];
        RegionAnnotation {
            frame_index,
            regions: [pts[..p].to_vec(), pts[p..2 * p].to_vec(), pts[2 * p..].to_vec()],
        }
    }

    /// Net motion direction of each region's centroid from first to last frame.
    pub fn region_directions(&self, eps: f64) -> [String; 3] {
        let first = self.annotation(0).centroids();
        let last = self.annotation(self.num_frames() - 1).centroids();
        std::array::from_fn(|r| motion_direction(last[r][0] - first[r][0], last[r][1] - first[r][1], eps))
    }
}

/// Articulatory name of a displacement in image coordinates: +x is anterior,
/// -y is superior. Components within `eps` of zero are omitted.
pub fn motion_direction(dx: f64, dy: f64, eps: f64) -> String {
    let horizontal = if dx > eps {
        Some("anterior")
    } else if dx < -eps {
        Some("posterior")
    } else {
        None
    };
    let vertical = if dy < -eps {
        Some("superior")
    } else if dy > eps {
        Some("inferior")
    } else {
        None
    };
    match (horizontal, vertical) {
        (Some(h), Some(v)) => format!("{h}-{v}"),
        (Some(h), None) => h.to_string(),
        (None, Some(v)) => v.to_string(),
        (None, None) => "stationary".to_string(),
    }
}
