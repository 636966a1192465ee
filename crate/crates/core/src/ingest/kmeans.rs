//! Lloyd's algorithm over row-major flattened frames with seeded k-means++
//! initialization.

use ndarray::{Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{IngestError, UtiClip};

/// Number of clusters kept when no explicit `k` is configured.
pub const DEFAULT_CLUSTER_COUNT: usize = 100;

pub fn default_cluster_count(num_frames: usize) -> usize {
    num_frames.min(DEFAULT_CLUSTER_COUNT)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub max_iters: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions { max_iters: 300 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    /// Cluster index of every frame, each in `[0, k)`.
    pub assignments: Vec<usize>,
    /// Mean frame of each cluster, shape `(k, H, W)`.
    pub centers: Array3<f64>,
    /// Total squared distance of frames to their centers.
    pub inertia: f64,
    pub seed: u64,
    /// Inertia after every Lloyd iteration; non-increasing.
    pub inertia_history: Vec<f64>,
}

impl Clustering {
    pub fn num_frames(&self) -> usize {
        self.assignments.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn center_flat(&self, cluster: usize) -> Vec<f64> {
        self.centers.index_axis(Axis(0), cluster).iter().copied().collect()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`; fall back to the
            // last point with positive weight.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            // Every point coincides with a chosen center.
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Clusters the frames of `clip` into `k` groups.
pub fn kmeans_frames(
    clip: &UtiClip,
    k: usize,
    seed: u64,
    options: KMeansOptions,
) -> Result<Clustering, IngestError> {
    let n = clip.num_frames();
    if k == 0 || k > n {
        return Err(IngestError::InvalidClusterCount { k, frames: n });
    }
    let points: Vec<Vec<f64>> = (0..n).map(|t| clip.flat_frame(t)).collect();
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_plus_plus(&points, k, &mut rng);

    let mut assignments: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..options.max_iters.max(1) {
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
        repair_empty_clusters(&points, &mut next, &mut centers);

        for (j, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> =
                points.iter().zip(&next).filter(|(_, &a)| a == j).map(|(p, _)| p).collect();
            let count = members.len() as f64;
            let mut mean = vec![0.0; dim];
            for m in &members {
                for (acc, v) in mean.iter_mut().zip(m.iter()) {
                    *acc += v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= count);
            *center = mean;
        }
        let inertia: f64 = points
            .iter()
            .zip(&next)
            .map(|(p, &a)| squared_distance(p, &centers[a]))
            .sum();
        history.push(inertia);
        let converged = next == assignments;
        assignments = next;
        if converged {
            break;
        }
    }

    let (h, w) = (clip.height(), clip.width());
    let flat: Vec<f64> = centers.into_iter().flatten().collect();
    Ok(Clustering {
        k,
        assignments,
        centers: Array3::from_shape_vec((k, h, w), flat).expect("k*h*w values"),
        inertia: *history.last().expect("at least one iteration"),
        seed,
        inertia_history: history,
    })
}

/// Moves, for each empty cluster, the farthest member of the largest cluster
/// into it.
fn repair_empty_clusters(points: &[Vec<f64>], assignments: &mut [usize], centers: &mut [Vec<f64>]) {
    let k = centers.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..k).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))).unwrap();
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if assignments[i] == largest {
                let d = squared_distance(p, &centers[largest]);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
        }
        let far = far.expect("largest cluster has members");
        assignments[far] = empty;
        centers[empty] = points[far].clone();
    }
}

/// Runs [`kmeans_frames`] with `restarts` consecutive seeds starting at
/// `seed` and keeps the lowest-inertia result (earliest seed on ties).
pub fn kmeans_frames_restarts(
    clip: &UtiClip,
    k: usize,
    seed: u64,
    restarts: usize,
    options: KMeansOptions,
) -> Result<Clustering, IngestError> {
    let mut best: Option<Clustering> = None;
    for r in 0..restarts.max(1) as u64 {
        let run = kmeans_frames(clip, k, seed.wrapping_add(r), options)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
