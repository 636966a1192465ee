//! Instruction / UTI / speech sequence assembly and the per-clip fusion
//! pipeline.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::container::{decode_tensors, encode_tensors, find_tensor, Dtype, NamedTensor};
use super::{
    fuse_and_project, project_speech, spatial_tokens, temporal_tokens, toy_patch_embed, toy_speech_encode,
    FusionError, ProjectionWeights, SpeechEncoderConfig,
};
use crate::ingest::UtiClip;

/// Which modalities a sequence carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Both,
    UtiOnly,
    SpeechOnly,
}

/// Instruction ids followed by the UTI tokens `Q_v` and then the speech
/// tokens `Q_a`. An absent modality contributes no rows and sets its flag.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedSequence {
    pub instruction: Vec<u32>,
    pub q_v: Array2<f64>,
    pub q_a: Array2<f64>,
    pub d_e: usize,
    pub uti_absent: bool,
    pub speech_absent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SequenceMeta {
    d_e: usize,
    mode: Modality,
    boundaries: (usize, usize),
    total_len: usize,
}

impl FusedSequence {
    pub fn mode(&self) -> Modality {
        match (self.uti_absent, self.speech_absent) {
            (false, false) => Modality::Both,
            (false, true) => Modality::UtiOnly,
            _ => Modality::SpeechOnly,
        }
    }

    /// End of the instruction segment and end of the UTI segment.
    pub fn boundaries(&self) -> (usize, usize) {
        let instr = self.instruction.len();
        (instr, instr + self.q_v.nrows())
    }

    pub fn total_len(&self) -> usize {
        self.instruction.len() + self.q_v.nrows() + self.q_a.nrows()
    }

    /// Segment names in emitted order, skipping absent modalities.
    pub fn segment_names(&self) -> Vec<&'static str> {
        let mut names = vec!["instruction"];
        if !self.uti_absent {
            names.push("uti");
        }
        if !self.speech_absent {
            names.push("speech");
        }
        names
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FusionError> {
        let instr = Array1::from_iter(self.instruction.iter().map(|&i| i as f64)).into_dyn();
        let tensors = [
            NamedTensor::new("instruction", Dtype::F64Le, instr),
            NamedTensor::matrix("Q_v", Dtype::F64Le, &self.q_v),
            NamedTensor::matrix("Q_a", Dtype::F64Le, &self.q_a),
        ];
        let meta = SequenceMeta {
            d_e: self.d_e,
            mode: self.mode(),
            boundaries: self.boundaries(),
            total_len: self.total_len(),
        };
        encode_tensors(&tensors, serde_json::to_value(meta)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FusionError> {
        let (tensors, meta) = decode_tensors(bytes)?;
        let meta: SequenceMeta = serde_json::from_value(meta)?;
        let instruction = find_tensor(&tensors, "instruction")?
            .data
            .iter()
            .map(|&v| {
                if v >= 0.0 && v <= u32::MAX as f64 && v.fract() == 0.0 {
                    Ok(v as u32)
                } else {
                    Err(FusionError::Container(format!("instruction id {v} is not a u32")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let seq = FusedSequence {
            instruction,
            q_v: find_tensor(&tensors, "Q_v")?.to_matrix()?,
            q_a: find_tensor(&tensors, "Q_a")?.to_matrix()?,
            d_e: meta.d_e,
            uti_absent: meta.mode == Modality::SpeechOnly,
            speech_absent: meta.mode == Modality::UtiOnly,
        };
        if seq.boundaries() != meta.boundaries || seq.total_len() != meta.total_len {
            return Err(FusionError::Container("sequence header disagrees with its tensors".into()));
        }
        Ok(seq)
    }
}

/// Orders the segments instruction, UTI, speech. Either modality may be
/// absent but not both.
pub fn assemble_sequence(
    instruction: &[u32],
    q_v: Option<&Array2<f64>>,
    q_a: Option<&Array2<f64>>,
) -> Result<FusedSequence, FusionError> {
    if instruction.is_empty() {
        return Err(FusionError::EmptyInstruction);
    }
    let d_e = match (q_v, q_a) {
        (None, None) => return Err(FusionError::NoModality),
        (Some(v), Some(a)) if v.ncols() != a.ncols() => {
            return Err(FusionError::DimensionMismatch { what: "Q_v vs Q_a width", left: v.ncols(), right: a.ncols() })
        }
        (Some(v), _) => v.ncols(),
        (None, Some(a)) => a.ncols(),
    };
    Ok(FusedSequence {
        instruction: instruction.to_vec(),
        q_v: q_v.cloned().unwrap_or_else(|| Array2::zeros((0, d_e))),
        q_a: q_a.cloned().unwrap_or_else(|| Array2::zeros((0, d_e))),
        d_e,
        uti_absent: q_v.is_none(),
        speech_absent: q_a.is_none(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    #[serde(default = "default_patch_size")]
    pub patch_size: usize,
    /// Patch embedding width `d`.
    #[serde(default = "default_patch_dim")]
    pub patch_dim: usize,
    /// Shared embedding width `d_e`.
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default)]
    pub speech: SpeechEncoderConfig,
    #[serde(default = "default_modality")]
    pub modality: Modality,
    /// Adapter settings passed through to a downstream fine-tuning job.
    #[serde(default = "default_lora_rank")]
    pub lora_rank: usize,
    #[serde(default = "default_lora_alpha")]
    pub lora_alpha: usize,
}

fn default_patch_size() -> usize {
    14
}
fn default_patch_dim() -> usize {
    32
}
fn default_embed_dim() -> usize {
    64
}
fn default_modality() -> Modality {
    Modality::Both
}
fn default_lora_rank() -> usize {
    64
}
fn default_lora_alpha() -> usize {
    128
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            patch_size: default_patch_size(),
            patch_dim: default_patch_dim(),
            embed_dim: default_embed_dim(),
            speech: SpeechEncoderConfig::default(),
            modality: default_modality(),
            lora_rank: default_lora_rank(),
            lora_alpha: default_lora_alpha(),
        }
    }
}

impl FusionConfig {
    pub fn seeded_weights(&self, seed: u64) -> ProjectionWeights {
        ProjectionWeights::seeded(self.speech.dim, self.patch_dim, self.embed_dim, seed)
    }
}

/// Instruction ids for a text prompt: its UTF-8 bytes.
pub fn instruction_ids(text: &str) -> Vec<u32> {
    text.bytes().map(u32::from).collect()
}

/// Runs both encoders, pools, projects and assembles one clip. `audio` may
/// be `None` only when the configured modality leaves speech out.
pub fn fuse_clip(
    clip: &UtiClip,
    audio: Option<&[f64]>,
    instruction: &[u32],
    weights: &ProjectionWeights,
    config: &FusionConfig,
) -> Result<FusedSequence, FusionError> {
    weights.validate()?;
    let q_v = if config.modality == Modality::SpeechOnly {
        None
    } else {
        let grid = toy_patch_embed(clip, config.patch_size, config.patch_dim)?;
        Some(fuse_and_project(&temporal_tokens(&grid), &spatial_tokens(&grid), &weights.w_v)?)
    };
    let q_a = if config.modality == Modality::UtiOnly {
        None
    } else {
        let audio = audio.ok_or(FusionError::MissingAudio)?;
        Some(project_speech(&toy_speech_encode(audio, &config.speech)?, &weights.w_a)?)
    };
    assemble_sequence(instruction, q_v.as_ref(), q_a.as_ref())
}
