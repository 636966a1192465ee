//! Projection matrices `W_a` and `W_v` with seeded initialization and a
//! container file plus JSON sidecar on disk.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::container::{find_tensor, read_tensors, write_tensors, Dtype, NamedTensor};
use super::FusionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsSidecar {
    pub d_h: usize,
    pub d: usize,
    pub d_e: usize,
    pub seed: Option<u64>,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionWeights {
    /// `d_h x d_e`.
    pub w_a: Array2<f64>,
    /// `d x d_e`.
    pub w_v: Array2<f64>,
    pub seed: Option<u64>,
    pub provenance: String,
}

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn uniform_init(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let bound = 1.0 / (rows.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

impl ProjectionWeights {
    pub fn seeded(d_h: usize, d: usize, d_e: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_a = uniform_init(d_h, d_e, &mut rng);
        let w_v = uniform_init(d, d_e, &mut rng);
        ProjectionWeights { w_a, w_v, seed: Some(seed), provenance: "seeded uniform init".into() }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if self.w_a.ncols() != self.w_v.ncols() {
            return Err(FusionError::DimensionMismatch {
                what: "W_a vs W_v output width",
                left: self.w_a.ncols(),
                right: self.w_v.ncols(),
            });
        }
        if self.w_a.iter().chain(self.w_v.iter()).any(|v| !v.is_finite()) {
            return Err(FusionError::InvalidConfig("projection weights contain non-finite entries".into()));
        }
        Ok(())
    }

    pub fn sidecar(&self) -> WeightsSidecar {
        WeightsSidecar {
            d_h: self.w_a.nrows(),
            d: self.w_v.nrows(),
            d_e: self.w_a.ncols(),
            seed: self.seed,
            provenance: self.provenance.clone(),
        }
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Writes `path` (f64 container) and its `.json` sidecar.
    pub fn save(&self, path: &Path) -> Result<(), FusionError> {
        self.validate()?;
        let sidecar = self.sidecar();
        let tensors = [
            NamedTensor::matrix("W_a", Dtype::F64Le, &self.w_a),
            NamedTensor::matrix("W_v", Dtype::F64Le, &self.w_v),
        ];
        write_tensors(path, &tensors, serde_json::to_value(&sidecar)?)?;
        std::fs::write(Self::sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FusionError> {
        let (tensors, _) = read_tensors(path)?;
        let sidecar: WeightsSidecar = serde_json::from_str(&std::fs::read_to_string(Self::sidecar_path(path))?)?;
        let w = ProjectionWeights {
            w_a: find_tensor(&tensors, "W_a")?.to_matrix()?,
            w_v: find_tensor(&tensors, "W_v")?.to_matrix()?,
            seed: sidecar.seed,
            provenance: sidecar.provenance.clone(),
        };
        w.validate()?;
        if w.sidecar() != sidecar {
            return Err(FusionError::Container("sidecar dimensions disagree with the weight tensors".into()));
        }
        Ok(w)
    }
}
