//! The deterministic reference tracker and the extractor contract that a
//! learned model must satisfy.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::{CoordinateSpace, Point, TrajectoryError, TrajectoryFile, TrajectorySequence, TrajectorySource};
use crate::ingest::UtiClip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub points_per_region: usize,
    /// Scan columns, `3 * points_per_region` of them, tip first. Evenly spaced
    /// across the frame when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<usize>>,
    /// Half-open row range `[start, end)` searched in each column; the full
    /// height when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_band: Option<(usize, usize)>,
    /// Centered moving-average window over time; must be odd.
    pub smoothing_window: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig { points_per_region: 3, columns: None, row_band: None, smoothing_window: 5 }
    }
}

/// `count` columns evenly spaced strictly inside `[0, width)`.
pub fn default_columns(width: usize, count: usize) -> Vec<usize> {
    (1..=count).map(|i| (width * i + (count + 1) / 2) / (count + 1)).collect()
}

/// What any trajectory extractor produces for a clip: the shape of its
/// feature map and the predicted key points for every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerOutput {
    /// `(h, w, c)` of the per-frame feature map.
    pub feature_map_shape: (usize, usize, usize),
    pub predicted_points: Vec<Vec<Point>>,
}

pub trait TrajectoryExtractor {
    fn points_per_region(&self) -> usize;
    fn source(&self) -> TrajectorySource;
    fn extract(&self, clip: &UtiClip) -> Result<TrackerOutput, TrajectoryError>;

    /// Runs the extractor and checks its output against the configured point
    /// count.
    fn track(&self, clip: &UtiClip) -> Result<TrajectorySequence, TrajectoryError> {
        let out = self.extract(clip)?;
        TrajectorySequence::new(
            out.predicted_points,
            self.points_per_region(),
            CoordinateSpace::RawPixels,
            self.source(),
        )
    }
}

/// Column-argmax tracker: in each scan column, the brightest row within the
/// band, smoothed over time. The feature map is the frame itself.
#[derive(Debug, Clone, Default)]
pub struct ReferenceTracker {
    pub config: TrackerConfig,
}

impl TrajectoryExtractor for ReferenceTracker {
    fn points_per_region(&self) -> usize {
        self.config.points_per_region
    }

    fn source(&self) -> TrajectorySource {
        TrajectorySource::ReferenceTracker
    }

    fn extract(&self, clip: &UtiClip) -> Result<TrackerOutput, TrajectoryError> {
        let cfg = &self.config;
        let (h, w) = (clip.height(), clip.width());
        if cfg.points_per_region == 0 {
            return Err(TrajectoryError::InvalidConfig("points_per_region must be >= 1".into()));
        }
        if cfg.smoothing_window == 0 || cfg.smoothing_window.is_multiple_of(2) {
            return Err(TrajectoryError::InvalidConfig(format!(
                "smoothing window must be odd, got {}",
                cfg.smoothing_window
            )));
        }
        let n_points = 3 * cfg.points_per_region;
        let columns = cfg.columns.clone().unwrap_or_else(|| default_columns(w, n_points));
        if columns.len() != n_points {
            return Err(TrajectoryError::InvalidConfig(format!(
                "{} scan columns configured, need {n_points}",
                columns.len()
            )));
        }
        if let Some(&column) = columns.iter().find(|&&c| c >= w) {
            return Err(TrajectoryError::ColumnOutOfRange { column, width: w });
        }
        let (r0, r1) = cfg.row_band.unwrap_or((0, h));
        if r0 >= r1 || r1 > h {
            return Err(TrajectoryError::InvalidConfig(format!("row band [{r0}, {r1}) invalid for height {h}")));
        }

        let t_len = clip.num_frames();
        if t_len == 0 {
            return Err(TrajectoryError::EmptyTrajectory);
        }
        // raw[k][t]: brightest row of column k at frame t, lowest row on ties.
        let raw: Vec<Vec<f64>> = columns
            .iter()
            .map(|&col| {
                (0..t_len)
                    .map(|t| {
                        let frame = clip.frame(t);
                        let mut best = r0;
                        for r in r0 + 1..r1 {
                            if frame[[r, col]] > frame[[best, col]] {
                                best = r;
                            }
                        }
                        best as f64
                    })
                    .collect()
            })
            .collect();
        let smoothed: Vec<Vec<f64>> = raw.iter().map(|ys| centered_moving_average(ys, cfg.smoothing_window)).collect();
        let predicted_points = (0..t_len)
            .map(|t| columns.iter().zip(&smoothed).map(|(&c, ys)| [c as f64, ys[t]]).collect())
            .collect();
        Ok(TrackerOutput { feature_map_shape: (h, w, 1), predicted_points })
    }
}

/// Centered moving average; near the ends the window shrinks symmetrically.
fn centered_moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|t| {
            let r = half.min(t).min(n - 1 - t);
            let slice = &values[t - r..=t + r];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Convenience wrapper around [`ReferenceTracker`].
pub fn reference_track(clip: &UtiClip, config: &TrackerConfig) -> Result<TrajectorySequence, TrajectoryError> {
    ReferenceTracker { config: config.clone() }.track(clip)
}

/// Adapter for an external trajectory model: runs a command that prints a
/// trajectory file (JSON) on stdout. `{clip_id}` and `{frame_dir}` in the
/// arguments are substituted per clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalCommandTracker {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
}

impl ExternalCommandTracker {
    pub fn track(&self, clip_id: &str, frame_dir: &Path) -> Result<TrajectorySequence, TrajectoryError> {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| a.replace("{clip_id}", clip_id).replace("{frame_dir}", &frame_dir.to_string_lossy()))
            .collect();
        let output = Command::new(&self.program).args(&args).output()?;
        if !output.status.success() {
            return Err(TrajectoryError::External(format!(
                "{} exited with {}: {}",
                self.program.display(),
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let file: TrajectoryFile = serde_json::from_slice(&output.stdout)?;
        let mut seq = file.into_sequence()?;
        seq.source = TrajectorySource::ExternalModel;
        Ok(seq)
    }
}
