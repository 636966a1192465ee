//! Dual-agent question/answer generation: a user agent samples diverse
//! questions from topic templates and a doctor agent answers them from the
//! knowledge record of one clip.

mod generation;
mod knowledge;
mod prompt;
mod sampling;
mod similarity;
mod templates;

pub use generation::{
    read_dataset, run_generation, write_dataset, DatasetHeader, DialogueRecord, ForgeConfig, HistoryScope,
    RecordFailure, RunExhaustion, RunReport, DATASET_SCHEMA, DATASET_SCHEMA_VERSION,
};
pub use knowledge::{prepare_trajectory, FilterOrder, KnowledgeEntry, KnowledgeRecord};
pub use prompt::{
    assemble_knowledge_prompt, assessment_token, downsample_indices, mock_doctor_reply, parse_knowledge_prompt,
    ParsedPrompt, DOCTOR_PROMPT_HEADER, SECTIONS,
};
pub use sampling::{
    accept_or_resample, accept_or_resample_with, check_temperature, reconstruct_question, sample_question,
    sample_question_with, template_probabilities, AcceptanceOutcome, AcceptanceParams, AcceptedQuestion, Attempt,
    ExhaustionReport, SampledQuestion, DEFAULT_MAX_RETRIES, DEFAULT_THRESHOLD, MAX_TEMPERATURE, MIN_TEMPERATURE,
};
pub use similarity::{diversity_score, Similarity, TrigramCosine};
pub use templates::{QuestionTemplate, QuestionTemplatePool, Topic, SLOTS};

use crate::gateway::GatewayError;

#[derive(Debug, thiserror::Error)]
pub enum ForgeError {
    #[error("template slot {{{0}}} cannot be resolved from a knowledge record")]
    UnresolvableSlot(String),
    #[error("topic {0} has no templates")]
    EmptyTopic(Topic),
    #[error("topic {0} is not in the template pool")]
    UnknownTopic(Topic),
    #[error("temperature {0} outside [0.1, 1.0]")]
    InvalidTemperature(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid knowledge record: {0}")]
    InvalidRecord(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("knowledge store is empty")]
    EmptyStore,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
