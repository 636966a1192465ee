use serde::{Deserialize, Serialize};

use super::{TrajectoryError, TrajectorySequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeDecision {
    Keep,
    Drop,
}

/// Largest Euclidean displacement of any tracked point from its first-frame
/// position.
pub fn max_displacement(traj: &TrajectorySequence) -> Result<f64, TrajectoryError> {
    traj.check_shape()?;
    let origin = &traj.frames[0];
    let mut best: f64 = 0.0;
    for frame in &traj.frames[1..] {
        for (p, o) in frame.iter().zip(origin) {
            best = best.max((p[0] - o[0]).hypot(p[1] - o[1]));
        }
    }
    Ok(best)
}

/// Keeps the sequence iff its maximum displacement exceeds `delta` strictly.
/// `delta` is in the units of the trajectory's coordinate space.
pub fn amplitude_filter(traj: &TrajectorySequence, delta: f64) -> Result<AmplitudeDecision, TrajectoryError> {
    if !(delta >= 0.0) {
        return Err(TrajectoryError::NegativeThreshold(delta));
    }
    Ok(if max_displacement(traj)? > delta { AmplitudeDecision::Keep } else { AmplitudeDecision::Drop })
}
