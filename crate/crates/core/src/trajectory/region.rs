use serde::{Deserialize, Serialize};

use super::{Point, TrajectoryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Tip,
    Body,
    Root,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Tip, Region::Body, Region::Root];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Tip => "tip",
            Region::Body => "body",
            Region::Root => "root",
        }
    }
}

/// Key points of one frame grouped into tip, body and root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAnnotation {
    pub frame_index: usize,
    pub regions: [Vec<Point>; 3],
}

impl RegionAnnotation {
    pub fn centroids(&self) -> [Point; 3] {
        std::array::from_fn(|r| {
            let pts = &self.regions[r];
            let n = pts.len().max(1) as f64;
            [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n]
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegionOrder {
    Ok,
    /// 1-based `(i, j)` region pairs with `i < j` where the mean x of region
    /// `i` is not strictly below that of region `j`.
    Violations(Vec<(usize, usize)>),
}

impl RegionOrder {
    pub fn is_ok(&self) -> bool {
        matches!(self, RegionOrder::Ok)
    }
}

/// Checks `x(R_i) < x(R_j)` for every `i < j`, where `x(R)` is the mean x of
/// the region's points.
pub fn validate_region_order(annotation: &RegionAnnotation) -> Result<RegionOrder, TrajectoryError> {
    let mut means = [0.0; 3];
    for (r, pts) in annotation.regions.iter().enumerate() {
        if pts.is_empty() {
            return Err(TrajectoryError::EmptyRegion(r + 1));
        }
        means[r] = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
    }
    let mut violations = Vec::new();
    for i in 0..3 {
        for j in i + 1..3 {
            if means[i] >= means[j] {
                violations.push((i + 1, j + 1));
            }
        }
    }
    Ok(if violations.is_empty() { RegionOrder::Ok } else { RegionOrder::Violations(violations) })
}
