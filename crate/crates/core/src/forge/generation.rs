//! The generation loop: accept a question per record and topic, assemble the
//! knowledge prompt, ask the gateway, and persist the dialogue records.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    accept_or_resample_with, assemble_knowledge_prompt, AcceptanceOutcome, AcceptanceParams, ExhaustionReport,
    ForgeError, KnowledgeEntry, QuestionTemplatePool, Similarity, Topic,
};
use crate::gateway::{Gateway, Usage};
use crate::numeric::exact_mean;

pub const DATASET_SCHEMA: &str = "utikit.dialogue";
pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// Which accepted questions a new candidate is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryScope {
    /// Every question accepted so far in the run.
    #[default]
    Global,
    /// Questions accepted so far for the same topic.
    PerTopic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgeConfig {
    #[serde(default = "default_topics")]
    pub topics: Vec<Topic>,
    #[serde(default = "default_quota")]
    pub quota_per_topic: usize,
    #[serde(default)]
    pub acceptance: AcceptanceParams,
    #[serde(default)]
    pub history_scope: HistoryScope,
    /// Largest number of trajectory frames shown in a prompt.
    #[serde(default = "default_max_prompt_frames")]
    pub max_prompt_frames: Option<usize>,
    /// Upper bound on in-flight gateway calls.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Stamped on every record so runs are reproducible.
    #[serde(default = "default_timestamp")]
    pub timestamp: String,
}

fn default_topics() -> Vec<Topic> {
    Topic::ALL.to_vec()
}
fn default_quota() -> usize {
    1
}
fn default_max_prompt_frames() -> Option<usize> {
    Some(100)
}
fn default_concurrency() -> usize {
    4
}
fn default_timestamp() -> String {
    "1970-01-01T00:00:00Z".to_string()
}

impl Default for ForgeConfig {
    fn default() -> Self {
        ForgeConfig {
            topics: default_topics(),
            quota_per_topic: default_quota(),
            acceptance: AcceptanceParams::default(),
            history_scope: HistoryScope::default(),
            max_prompt_frames: default_max_prompt_frames(),
            concurrency: default_concurrency(),
            timestamp: default_timestamp(),
        }
    }
}

impl ForgeConfig {
    pub fn validate(&self) -> Result<(), ForgeError> {
        self.acceptance.validate()?;
        if self.concurrency == 0 {
            return Err(ForgeError::InvalidConfig("concurrency must be >= 1".into()));
        }
        if self.max_prompt_frames == Some(0) {
            return Err(ForgeError::InvalidConfig("max_prompt_frames must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub record_id: String,
    pub knowledge_id: String,
    pub clip_id: String,
    pub topic: Topic,
    pub question: String,
    pub diversity_score: f64,
    pub temperature: f64,
    pub reconstructed: bool,
    pub prompt: String,
    pub response: String,
    pub gateway_backend: String,
    pub usage: Usage,
    pub retries: u32,
    pub timestamp: String,
    /// Experts have not reviewed this record.
    #[serde(default)]
    pub expert_verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: String,
    pub version: u32,
}

impl Default for DatasetHeader {
    fn default() -> Self {
        DatasetHeader { schema: DATASET_SCHEMA.to_string(), version: DATASET_SCHEMA_VERSION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFailure {
    pub record_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunExhaustion {
    pub record_id: String,
    pub report: ExhaustionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub requested: usize,
    pub written: usize,
    pub exhaustions: Vec<RunExhaustion>,
    pub failures: Vec<RecordFailure>,
    pub reconstructions: usize,
    /// `None` when nothing was written.
    pub mean_diversity: Option<f64>,
}

struct Job {
    record_id: String,
    entry_index: usize,
    topic: Topic,
    question: String,
    diversity_score: f64,
    reconstructed: bool,
    prompt: String,
}

/// Runs the full generation loop over `store`.
///
/// Question acceptance is sequential so every diversity score is computed
/// against the history as it stood at that point; gateway calls then run
/// on at most `config.concurrency` threads and results are committed in
/// record order.
pub fn run_generation(
    config: &ForgeConfig,
    seed: u64,
    store: &[KnowledgeEntry],
    pool: &QuestionTemplatePool,
    gateway: &Gateway,
    sim: &dyn Similarity,
) -> Result<(Vec<DialogueRecord>, RunReport), ForgeError> {
    config.validate()?;
    pool.validate()?;
    if store.is_empty() {
        return Err(ForgeError::EmptyStore);
    }
    for topic in &config.topics {
        pool.templates(*topic)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut histories: Vec<Vec<String>> = vec![Vec::new(); Topic::ALL.len()];
    let mut jobs = Vec::new();
    let mut exhaustions = Vec::new();
    let mut failures = Vec::new();
    let mut requested = 0;

    for (entry_index, entry) in store.iter().enumerate() {
        for &topic in &config.topics {
            for k in 0..config.quota_per_topic {
                requested += 1;
                let record_id = format!("{}-{}-{}", entry.knowledge_id, topic, k + 1);
                let slot = match config.history_scope {
                    HistoryScope::Global => 0,
                    HistoryScope::PerTopic => Topic::ALL.iter().position(|t| *t == topic).expect("known topic"),
                };
                let outcome = accept_or_resample_with(
                    topic,
                    pool,
                    &entry.record,
                    &histories[slot],
                    &config.acceptance,
                    sim,
                    &mut rng,
                );
                match outcome {
                    Ok(AcceptanceOutcome::Accepted(a)) => {
                        histories[slot].push(a.question.clone());
                        let prompt = assemble_knowledge_prompt(&entry.record, &a.question, config.max_prompt_frames);
                        jobs.push(Job {
                            record_id,
                            entry_index,
                            topic,
                            question: a.question,
                            diversity_score: a.diversity_score,
                            reconstructed: a.reconstructed,
                            prompt,
                        });
                    }
                    Ok(AcceptanceOutcome::Exhausted(report)) => exhaustions.push(RunExhaustion { record_id, report }),
                    Err(e) => failures.push(RecordFailure { record_id, error: e.to_string() }),
                }
            }
        }
    }

    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| ForgeError::InvalidConfig(e.to_string()))?;
    let temperature = config.acceptance.temperature;
    let replies: Vec<_> =
        threads.install(|| jobs.par_iter().map(|job| gateway.generate(&job.prompt, temperature)).collect());

    let mut records = Vec::with_capacity(jobs.len());
    for (job, reply) in jobs.into_iter().zip(replies) {
        match reply {
            Ok(r) => {
                let entry = &store[job.entry_index];
                records.push(DialogueRecord {
                    record_id: job.record_id,
                    knowledge_id: entry.knowledge_id.clone(),
                    clip_id: entry.clip_id.clone(),
                    topic: job.topic,
                    question: job.question,
                    diversity_score: job.diversity_score,
                    temperature,
                    reconstructed: job.reconstructed,
                    prompt: job.prompt,
                    response: r.text,
                    gateway_backend: r.backend,
                    usage: r.usage,
                    retries: r.retries,
                    timestamp: config.timestamp.clone(),
                    expert_verified: false,
                });
            }
            Err(e) => failures.push(RecordFailure { record_id: job.record_id, error: e.to_string() }),
        }
    }

    let scores: Vec<f64> = records.iter().map(|r| r.diversity_score).collect();
    let report = RunReport {
        requested,
        written: records.len(),
        reconstructions: records.iter().filter(|r| r.reconstructed).count(),
        exhaustions,
        failures,
        mean_diversity: exact_mean(&scores),
    };
    Ok((records, report))
}

/// Writes the schema header line followed by one record per line.
pub fn write_dataset(path: &Path, records: &[DialogueRecord]) -> Result<(), ForgeError> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &DatasetHeader::default())?;
    out.write_all(b"\n")?;
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<DialogueRecord>), ForgeError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines.next().ok_or_else(|| ForgeError::InvalidDataset("missing header line".into()))??;
    let header: DatasetHeader = serde_json::from_str(&header_line)?;
    if header.schema != DATASET_SCHEMA || header.version != DATASET_SCHEMA_VERSION {
        return Err(ForgeError::InvalidDataset(format!("unsupported schema {} v{}", header.schema, header.version)));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok((header, records))
}
