use serde::{Deserialize, Serialize};

use super::{CoordinateSpace, TrajectoryError, TrajectorySequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
}

/// Maps every coordinate into `[0, 1]` by `(v - min) / (max - min)`, with min
/// and max taken per axis over all frames and all points jointly. An axis with
/// zero range maps to 0.5 and is flagged.
pub fn normalize_trajectory(traj: &TrajectorySequence) -> Result<TrajectorySequence, TrajectoryError> {
    if traj.space != CoordinateSpace::RawPixels {
        return Err(TrajectoryError::WrongSpace { expected: CoordinateSpace::RawPixels });
    }
    traj.check_shape()?;
    let ranges: [AxisRange; 2] = std::array::from_fn(|axis| {
        let mut r = AxisRange { min: f64::INFINITY, max: f64::NEG_INFINITY };
        for p in traj.frames.iter().flatten() {
            r.min = r.min.min(p[axis]);
            r.max = r.max.max(p[axis]);
        }
        r
    });
    let degenerate = ranges.map(|r| r.max == r.min);
    let frames = traj
        .frames
        .iter()
        .map(|pts| {
            pts.iter()
                .map(|p| {
                    std::array::from_fn(|axis| {
                        let r = ranges[axis];
                        if degenerate[axis] {
                            0.5
                        } else {
                            ((p[axis] - r.min) / (r.max - r.min)).clamp(0.0, 1.0)
                        }
                    })
                })
                .collect()
        })
        .collect();
    Ok(TrajectorySequence {
        frames,
        points_per_region: traj.points_per_region,
        space: CoordinateSpace::UnitNormalized,
        source: traj.source,
        degenerate_axes: degenerate,
        normalization: Some(ranges),
    })
}

/// Inverse of [`normalize_trajectory`] using the stored ranges.
pub fn denormalize_trajectory(traj: &TrajectorySequence) -> Result<TrajectorySequence, TrajectoryError> {
    if traj.space != CoordinateSpace::UnitNormalized {
        return Err(TrajectoryError::WrongSpace { expected: CoordinateSpace::UnitNormalized });
    }
    let ranges = traj.normalization.ok_or_else(|| {
        TrajectoryError::InvalidConfig("normalized trajectory carries no ranges".into())
    })?;
    let frames = traj
        .frames
        .iter()
        .map(|pts| {
            pts.iter()
                .map(|p| {
                    std::array::from_fn(|axis| {
                        let r = ranges[axis];
                        if traj.degenerate_axes[axis] {
                            r.min
                        } else {
                            r.min + p[axis] * (r.max - r.min)
                        }
                    })
                })
                .collect()
        })
        .collect();
    Ok(TrajectorySequence {
        frames,
        points_per_region: traj.points_per_region,
        space: CoordinateSpace::RawPixels,
        source: traj.source,
        degenerate_axes: [false; 2],
        normalization: None,
    })
}
