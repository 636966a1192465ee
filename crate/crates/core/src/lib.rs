//! Data preparation, dialogue synthesis, multimodal fusion and evaluation
//! for ultrasound tongue imaging (UTI) speech rehabilitation.
//!
//! The crate is split along the pipeline:
//!
//! - [`ingest`]: clip loading, K-means keyframe selection, low-motion filtering
//!   and the synthetic moving-blob fixture generator.
//! - [`trajectory`]: tongue-region ordering checks, the reference tracker,
//!   unit-space normalization and the motion amplitude filter.
//! - [`forge`]: the dual-agent question/answer generator.
//! - [`gateway`]: LLM backends (deterministic mock and HTTP) with retry.
//! - [`fusion`]: toy speech/UTI encoders, spatial and temporal token pooling,
//!   projections and instruction-sequence assembly.
//! - [`eval`]: BLEU, ROUGE-L, METEOR, classification metrics, judge scoring and
//!   report tables.

pub mod eval;
pub mod forge;
pub mod fusion;
pub mod gateway;
pub mod ingest;
pub mod numeric;
pub mod trajectory;
