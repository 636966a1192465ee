//! Reference speech encoder: framed log band energies, replicated across
//! synthetic layers that differ by repeated temporal smoothing.

use ndarray::{Array2, ArrayView2};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::FusionError;

/// Kernel applied along time once per layer above the first.
pub const SMOOTHING_KERNEL: [f64; 3] = [0.25, 0.5, 0.25];

const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeechEncoderConfig {
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_hop")]
    pub hop: usize,
    /// Feature width `d_h`.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Number of layers `L`.
    #[serde(default = "default_layers")]
    pub layers: usize,
    /// 1-based layer handed to the projection; `None` means `L - 1`.
    #[serde(default)]
    pub selected_layer: Option<usize>,
}

fn default_window() -> usize {
    400
}
fn default_hop() -> usize {
    160
}
fn default_dim() -> usize {
    32
}
fn default_layers() -> usize {
    4
}

impl Default for SpeechEncoderConfig {
    fn default() -> Self {
        SpeechEncoderConfig {
            window: default_window(),
            hop: default_hop(),
            dim: default_dim(),
            layers: default_layers(),
            selected_layer: None,
        }
    }
}

impl SpeechEncoderConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if self.window == 0 || self.hop == 0 || self.dim == 0 || self.layers == 0 {
            return Err(FusionError::InvalidConfig("window, hop, dim and layers must be >= 1".into()));
        }
        if self.dim > self.window / 2 + 1 {
            return Err(FusionError::InvalidConfig(format!(
                "dim {} exceeds the {} spectral bins of a {}-sample window",
                self.dim,
                self.window / 2 + 1,
                self.window
            )));
        }
        let selected = self.selected_layer_index();
        if selected == 0 || selected > self.layers {
            return Err(FusionError::InvalidLayer { index: selected, layers: self.layers });
        }
        Ok(())
    }

    pub fn selected_layer_index(&self) -> usize {
        self.selected_layer.unwrap_or(self.layers.saturating_sub(1).max(1))
    }

    /// `floor((T_a - window) / hop) + 1`, or 0 for audio shorter than a window.
    pub fn frame_count(&self, samples: usize) -> usize {
        if samples < self.window {
            0
        } else {
            (samples - self.window) / self.hop + 1
        }
    }
}

/// Hidden states of every layer, each `n x d_h`, plus the 1-based layer
/// selected for projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechFeatures {
    pub layers: Vec<Array2<f64>>,
    pub selected_layer_index: usize,
}

impl SpeechFeatures {
    pub fn new(layers: Vec<Array2<f64>>, selected_layer_index: usize) -> Result<Self, FusionError> {
        let f = SpeechFeatures { layers, selected_layer_index };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let Some(first) = self.layers.first() else {
            return Err(FusionError::InvalidConfig("speech features have no layers".into()));
        };
        if self.layers.iter().any(|l| l.dim() != first.dim()) {
            return Err(FusionError::InvalidConfig("speech layers differ in shape".into()));
        }
        if self.selected_layer_index == 0 || self.selected_layer_index > self.layers.len() {
            return Err(FusionError::InvalidLayer { index: self.selected_layer_index, layers: self.layers.len() });
        }
        Ok(())
    }

    pub fn num_frames(&self) -> usize {
        self.layers[0].nrows()
    }

    pub fn dim(&self) -> usize {
        self.layers[0].ncols()
    }

    pub fn selected(&self) -> ArrayView2<'_, f64> {
        self.layers[self.selected_layer_index - 1].view()
    }
}

/// One pass of [`SMOOTHING_KERNEL`] along the rows; edge rows reuse
/// themselves as the missing neighbor.
pub fn smooth_time(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    Array2::from_shape_fn(x.dim(), |(i, j)| {
        let prev = x[[i.saturating_sub(1), j]];
        let next = x[[(i + 1).min(n - 1), j]];
        SMOOTHING_KERNEL[0] * prev + SMOOTHING_KERNEL[1] * x[[i, j]] + SMOOTHING_KERNEL[2] * next
    })
}

/// Bin range `[start, end)` of band `b` when `bins` bins are split into
/// `bands` contiguous groups.
fn band_bounds(b: usize, bands: usize, bins: usize) -> (usize, usize) {
    (b * bins / bands, (b + 1) * bins / bands)
}

pub fn toy_speech_encode(audio: &[f64], config: &SpeechEncoderConfig) -> Result<SpeechFeatures, FusionError> {
    config.validate()?;
    let n = config.frame_count(audio.len());
    if n == 0 {
        return Err(FusionError::AudioTooShort { samples: audio.len(), window: config.window });
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(config.window);
    let bins = config.window / 2 + 1;
    let mut base = Array2::zeros((n, config.dim));
    let mut buf = vec![Complex::new(0.0, 0.0); config.window];
    for frame in 0..n {
        let start = frame * config.hop;
        for (slot, &s) in buf.iter_mut().zip(&audio[start..start + config.window]) {
            *slot = Complex::new(s, 0.0);
        }
        fft.process(&mut buf);
        for b in 0..config.dim {
            let (lo, hi) = band_bounds(b, config.dim, bins);
            let energy: f64 = buf[lo..hi].iter().map(|c| c.norm_sqr()).sum();
            base[[frame, b]] = (energy + LOG_FLOOR).ln();
        }
    }
    let mut layers = Vec::with_capacity(config.layers);
    layers.push(base);
    for _ in 1..config.layers {
        let next = smooth_time(layers.last().expect("at least one layer"));
        layers.push(next);
    }
    SpeechFeatures::new(layers, config.selected_layer_index())
}

/// `Q_a = H_selected * W_a`.
pub fn project_speech(features: &SpeechFeatures, w_a: &Array2<f64>) -> Result<Array2<f64>, FusionError> {
    let h = features.selected();
    if h.ncols() != w_a.nrows() {
        return Err(FusionError::DimensionMismatch {
            what: "speech features x W_a",
            left: h.ncols(),
            right: w_a.nrows(),
        });
    }
    Ok(h.dot(w_a))
}
