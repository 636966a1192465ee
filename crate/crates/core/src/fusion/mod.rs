//! Multimodal front-end: speech and ultrasound encoders, token pooling,
//! projection into a shared width and sequence assembly.

mod container;
mod patch;
mod sequence;
mod speech;
mod weights;

pub use container::{
    decode_tensors, encode_tensors, find_tensor, read_tensors, write_tensors, ContainerHeader, Dtype, NamedTensor,
    TensorInfo, MAGIC,
};
pub use patch::{
    concat_tokens, fuse_and_project, spatial_tokens, temporal_tokens, toy_patch_embed, PatchGrid, PATCH_FEATURES,
};
pub use sequence::{assemble_sequence, fuse_clip, instruction_ids, FusedSequence, FusionConfig, Modality};
pub use speech::{project_speech, smooth_time, toy_speech_encode, SpeechEncoderConfig, SpeechFeatures, SMOOTHING_KERNEL};
pub use weights::{uniform_init, ProjectionWeights, WeightsSidecar};

#[derive(Debug, thiserror::Error)]
pub enum FusionError {
    #[error("audio has {samples} samples, shorter than one {window}-sample window")]
    AudioTooShort { samples: usize, window: usize },
    #[error("patch size {patch} does not divide frame {height}x{width}")]
    PatchSize { patch: usize, height: usize, width: usize },
    #[error("{what}: {left} vs {right}")]
    DimensionMismatch { what: &'static str, left: usize, right: usize },
    #[error("layer {index} outside 1..={layers}")]
    InvalidLayer { index: usize, layers: usize },
    #[error("instruction segment is empty")]
    EmptyInstruction,
    #[error("sequence needs at least one of UTI or speech tokens")]
    NoModality,
    #[error("speech is enabled but the clip has no audio")]
    MissingAudio,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("tensor container: {0}")]
    Container(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
