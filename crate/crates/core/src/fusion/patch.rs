//! Reference patch embedding and the spatial / temporal token pooling.

use ndarray::{concatenate, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::FusionError;
use crate::ingest::UtiClip;
use crate::numeric::exact_sum;

/// Statistics computed per patch before tiling to the embedding width.
pub const PATCH_FEATURES: [&str; 4] = ["mean", "variance", "horizontal_gradient", "vertical_gradient"];

/// Patch embeddings `X` of shape `(T_v, N, d)`, patches in raster order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub embeddings: Array3<f64>,
    pub patch_size: usize,
    pub frame_dims: (usize, usize),
}

impl PatchGrid {
    pub fn new(embeddings: Array3<f64>, patch_size: usize, frame_dims: (usize, usize)) -> Result<Self, FusionError> {
        let grid = PatchGrid { embeddings, patch_size, frame_dims };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let (h, w) = self.frame_dims;
        let p = self.patch_size;
        if p == 0 || h % p != 0 || w % p != 0 {
            return Err(FusionError::PatchSize { patch: p, height: h, width: w });
        }
        let (t, n, d) = self.embeddings.dim();
        if t == 0 || d == 0 {
            return Err(FusionError::InvalidConfig("patch grid needs at least one frame and one dim".into()));
        }
        if n != (h / p) * (w / p) {
            return Err(FusionError::DimensionMismatch { what: "patch count vs grid", left: n, right: (h / p) * (w / p) });
        }
        Ok(())
    }

    /// `(H / p, W / p)`.
    pub fn grid_dims(&self) -> (usize, usize) {
        (self.frame_dims.0 / self.patch_size, self.frame_dims.1 / self.patch_size)
    }

    pub fn num_frames(&self) -> usize {
        self.embeddings.dim().0
    }

    pub fn num_patches(&self) -> usize {
        self.embeddings.dim().1
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim().2
    }
}

fn mean(values: impl IntoIterator<Item = f64>, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        exact_sum(values) / count as f64
    }
}

/// Splits every frame into `p x p` patches and describes each patch by its
/// mean, variance and mean horizontal / vertical forward differences, tiled
/// cyclically to width `d`.
pub fn toy_patch_embed(clip: &UtiClip, p: usize, d: usize) -> Result<PatchGrid, FusionError> {
    let (t, h, w) = clip.frames.dim();
    if p == 0 || h % p != 0 || w % p != 0 {
        return Err(FusionError::PatchSize { patch: p, height: h, width: w });
    }
    if d == 0 {
        return Err(FusionError::InvalidConfig("embedding width must be >= 1".into()));
    }
    let (gh, gw) = (h / p, w / p);
    let mut x = Array3::zeros((t, gh * gw, d));
    for f in 0..t {
        let frame = clip.frames.index_axis(Axis(0), f);
        for gr in 0..gh {
            for gc in 0..gw {
                let patch = frame.slice(ndarray::s![gr * p..(gr + 1) * p, gc * p..(gc + 1) * p]);
                let m = mean(patch.iter().copied(), p * p);
                let var = mean(patch.iter().map(|v| (v - m) * (v - m)), p * p);
                let hgrad = mean(
                    (0..p).flat_map(|r| (0..p - 1).map(move |c| (r, c))).map(|(r, c)| patch[[r, c + 1]] - patch[[r, c]]),
                    p * (p - 1),
                );
                let vgrad = mean(
                    (0..p - 1).flat_map(|r| (0..p).map(move |c| (r, c))).map(|(r, c)| patch[[r + 1, c]] - patch[[r, c]]),
                    p * (p - 1),
                );
                let feats = [m, var, hgrad, vgrad];
                for k in 0..d {
                    x[[f, gr * gw + gc, k]] = feats[k % feats.len()];
                }
            }
        }
    }
    PatchGrid::new(x, p, (h, w))
}

/// `z[i]`: mean over frames of patch `i`'s embedding, shape `(N, d)`.
pub fn spatial_tokens(grid: &PatchGrid) -> Array2<f64> {
    let (t, n, d) = grid.embeddings.dim();
    Array2::from_shape_fn((n, d), |(i, k)| mean((0..t).map(|j| grid.embeddings[[j, i, k]]), t))
}

/// `t[i]`: mean over patches of frame `i`'s embeddings, shape `(T_v, d)`.
pub fn temporal_tokens(grid: &PatchGrid) -> Array2<f64> {
    let (t, n, d) = grid.embeddings.dim();
    Array2::from_shape_fn((t, d), |(i, k)| mean((0..n).map(|j| grid.embeddings[[i, j, k]]), n))
}

/// `v = [t; z]`, temporal rows first.
pub fn concat_tokens(t: &Array2<f64>, z: &Array2<f64>) -> Result<Array2<f64>, FusionError> {
    if t.ncols() != z.ncols() {
        return Err(FusionError::DimensionMismatch { what: "temporal vs spatial width", left: t.ncols(), right: z.ncols() });
    }
    Ok(concatenate(Axis(0), &[t.view(), z.view()]).expect("widths checked"))
}

/// `Q_v = [t; z] * W_v`.
pub fn fuse_and_project(t: &Array2<f64>, z: &Array2<f64>, w_v: &Array2<f64>) -> Result<Array2<f64>, FusionError> {
    let v = concat_tokens(t, z)?;
    if v.ncols() != w_v.nrows() {
        return Err(FusionError::DimensionMismatch { what: "visual tokens x W_v", left: v.ncols(), right: w_v.nrows() });
    }
    Ok(v.dot(w_v))
}
