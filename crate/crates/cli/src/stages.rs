//! The five pipeline stages, their artifacts, and the resumable runner.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use uti_core::eval::{evaluate, write_jsonl, GoldRecord, Prediction};
use uti_core::forge::{
    prepare_trajectory, read_dataset, run_generation, write_dataset, KnowledgeEntry, KnowledgeRecord,
    QuestionTemplatePool, TrigramCosine,
};
use uti_core::fusion::{fuse_clip, instruction_ids, Modality, ProjectionWeights};
use uti_core::gateway::{Gateway, HttpBackend, RetryPolicy};
use uti_core::ingest::fixtures::read_wav;
use uti_core::ingest::{
    default_cluster_count, dynamic_variance_filter, kmeans_frames_restarts, load_clip, load_manifest,
    select_keyframes, ClipManifestEntry, KMeansOptions, UtiClip,
};
use uti_core::trajectory::{
    max_displacement, reference_track, validate_region_order, write_trajectory_file, ExternalCommandTracker,
    TrajectoryFile, TrajectorySequence,
};

use crate::config::{BackendKind, GatewaySection, PipelineConfig};
use crate::manifest::{append_run_manifest, hash_dir, hash_json, latest, read_run_manifest, ContentHasher, ManifestEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Stage {
    Ingest,
    Trajectory,
    Forge,
    Fuse,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Ingest, Stage::Trajectory, Stage::Forge, Stage::Fuse, Stage::Eval];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Trajectory => "trajectory",
            Stage::Forge => "forge",
            Stage::Fuse => "fuse",
            Stage::Eval => "eval",
        }
    }

    fn index(self) -> usize {
        Stage::ALL.iter().position(|s| *s == self).expect("listed")
    }

    /// Stages that must have run before this one, in order.
    pub fn upstream(self) -> &'static [Stage] {
        &Stage::ALL[..self.index()]
    }

    pub fn output_dir(self, work_dir: &Path) -> PathBuf {
        work_dir.join(self.as_str())
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: Stage,
    pub status: StageStatus,
    pub entry: ManifestEntry,
    /// Eval only: responses without a readable diagnosis.
    pub unparseable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestRecord {
    pub clip_id: String,
    pub frames: usize,
    pub k: usize,
    pub seed: u64,
    pub inertia: f64,
    pub keyframes: Vec<usize>,
    pub retained: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub clip_id: String,
    pub frames: usize,
    pub max_displacement_px: f64,
    pub kept: bool,
    pub region_order_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseIndexEntry {
    pub clip_id: String,
    pub file: String,
    pub mode: Modality,
    pub boundaries: (usize, usize),
    pub total_len: usize,
}

pub fn build_gateway(section: &GatewaySection) -> Result<Gateway> {
    Ok(match section.backend {
        BackendKind::Mock => Gateway::mock(),
        BackendKind::Http => {
            let endpoint = section.endpoint.clone().context("http backend needs an endpoint")?;
            let backend = HttpBackend::from_env(endpoint, Duration::from_millis(section.timeout_ms));
            let retry = RetryPolicy { max_retries: section.max_retries, ..RetryPolicy::default() };
            Gateway::new(Box::new(backend), section.model.clone(), retry)
        }
    })
}

fn manifest_dir(config: &PipelineConfig) -> PathBuf {
    config.manifest_path().parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_entries(config: &PipelineConfig) -> Result<Vec<ClipManifestEntry>> {
    let path = config.manifest_path();
    let entries = load_manifest(&path).with_context(|| format!("loading clip manifest {}", path.display()))?;
    if entries.is_empty() {
        bail!("clip manifest {} has no entries", path.display());
    }
    Ok(entries)
}

fn read_jsonl_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    uti_core::eval::read_jsonl(path).with_context(|| format!("reading {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Hash of the clip manifest and every frame and audio file it references.
fn ingest_inputs_hash(config: &PipelineConfig) -> Result<String> {
    let base = manifest_dir(config);
    let mut h = ContentHasher::new();
    h.file("manifest", &config.manifest_path())?;
    for entry in load_entries(config)? {
        for path in entry.frame_paths(&base)? {
            let label = path.strip_prefix(&base).unwrap_or(&path).to_string_lossy().into_owned();
            h.file(&label, &path)?;
        }
        if let Some(audio) = &entry.audio_file {
            h.file(&audio.to_string_lossy(), &base.join(audio))?;
        }
    }
    Ok(h.finish())
}

fn stage_seed(stage: Stage, config: &PipelineConfig) -> Option<u64> {
    match stage {
        Stage::Ingest => Some(config.ingest.seed),
        Stage::Forge => Some(config.forge.seed),
        Stage::Fuse => Some(config.fusion.seed),
        Stage::Trajectory | Stage::Eval => None,
    }
}

fn config_hash(stage: Stage, config: &PipelineConfig) -> String {
    match stage {
        Stage::Ingest => hash_json(&config.ingest),
        Stage::Trajectory => hash_json(&config.trajectory),
        Stage::Forge => hash_json(&config.forge),
        Stage::Fuse => hash_json(&config.fusion),
        Stage::Eval => hash_json(&config.eval),
    }
}

/// Checks that every upstream stage has current outputs and that the chain of
/// recorded hashes is unbroken; returns the immediate upstream output hash.
fn check_upstream(stage: Stage, work_dir: &Path, entries: &[ManifestEntry]) -> Result<Option<String>> {
    let mut prev_outputs: Option<String> = None;
    for &up in stage.upstream() {
        let hint = format!("run `utikit run {up}` first");
        let Some(entry) = latest(entries, up.as_str()) else {
            bail!("stage `{stage}` needs outputs of stage `{up}`, which has not run; {hint}");
        };
        if hash_dir(&up.output_dir(work_dir))?.as_deref() != Some(entry.outputs_hash.as_str()) {
            bail!("stage `{stage}` needs outputs of stage `{up}`, which are missing or modified; {hint}");
        }
        if let Some(p) = &prev_outputs {
            if &entry.inputs_hash != p {
                bail!("stage `{stage}` needs outputs of stage `{up}`, which are stale relative to its upstream; {hint}");
            }
        }
        prev_outputs = Some(entry.outputs_hash.clone());
    }
    Ok(prev_outputs)
}

/// Runs one stage unless its inputs, config and outputs are unchanged since
/// the last recorded run.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<StageOutcome> {
    let work_dir = config.work_dir();
    let entries = read_run_manifest(&work_dir)?;
    let inputs_hash = match check_upstream(stage, &work_dir, &entries)? {
        Some(h) => h,
        None => ingest_inputs_hash(config)?,
    };
    let config_hash = config_hash(stage, config);
    let out_dir = stage.output_dir(&work_dir);

    if let Some(prev) = latest(&entries, stage.as_str()) {
        if prev.inputs_hash == inputs_hash
            && prev.config_hash == config_hash
            && hash_dir(&out_dir)?.as_deref() == Some(prev.outputs_hash.as_str())
        {
            let unparseable = if stage == Stage::Eval { count_unparseable(&out_dir)? } else { 0 };
            return Ok(StageOutcome { stage, status: StageStatus::Skipped, entry: prev.clone(), unparseable });
        }
    }

    let start = Instant::now();
    fresh_dir(&out_dir)?;
    let unparseable = match stage {
        Stage::Ingest => run_ingest(config, &out_dir)?,
        Stage::Trajectory => run_trajectory(config, &work_dir, &out_dir)?,
        Stage::Forge => run_forge(config, &work_dir, &out_dir)?,
        Stage::Fuse => run_fuse(config, &work_dir, &out_dir)?,
        Stage::Eval => run_eval(config, &work_dir, &out_dir)?,
    };
    let outputs_hash = hash_dir(&out_dir)?.with_context(|| format!("stage `{stage}` produced no outputs"))?;
    let entry = ManifestEntry {
        stage: stage.as_str().to_string(),
        inputs_hash,
        outputs_hash,
        config_hash,
        seed: stage_seed(stage, config),
        duration_ms: start.elapsed().as_millis() as u64,
    };
    append_run_manifest(&work_dir, &entry)?;
    Ok(StageOutcome { stage, status: StageStatus::Ran, entry, unparseable })
}

/// Runs every stage in order.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Vec<StageOutcome>> {
    Stage::ALL.iter().map(|&s| run_stage(s, config)).collect()
}

fn run_ingest(config: &PipelineConfig, out_dir: &Path) -> Result<usize> {
    let base = manifest_dir(config);
    let cfg = &config.ingest;
    let mut records = Vec::new();
    for entry in load_entries(config)? {
        let clip = load_clip(&entry, &base).with_context(|| format!("loading clip {}", entry.clip_id))?;
        let k = cfg.k.unwrap_or_else(|| default_cluster_count(clip.num_frames()));
        let clustering =
            kmeans_frames_restarts(&clip, k, cfg.seed, cfg.restarts, KMeansOptions { max_iters: cfg.max_iters })
                .with_context(|| format!("clustering clip {}", entry.clip_id))?;
        records.push(IngestRecord {
            clip_id: entry.clip_id.clone(),
            frames: clip.num_frames(),
            k,
            seed: cfg.seed,
            inertia: clustering.inertia,
            keyframes: select_keyframes(&clustering, &clip)?,
            retained: dynamic_variance_filter(&clip, &clustering, cfg.variance_percentile)?,
        });
    }
    write_jsonl(&out_dir.join("keyframes.jsonl"), &records)?;
    Ok(0)
}

/// Clips with their retained frames, in manifest order.
fn retained_clips(config: &PipelineConfig, work_dir: &Path) -> Result<Vec<(ClipManifestEntry, UtiClip)>> {
    let base = manifest_dir(config);
    let records: Vec<IngestRecord> = read_jsonl_file(&Stage::Ingest.output_dir(work_dir).join("keyframes.jsonl"))?;
    let entries = load_entries(config)?;
    if records.len() != entries.len() {
        bail!("ingest outputs cover {} clips but the manifest lists {}", records.len(), entries.len());
    }
    entries
        .into_iter()
        .zip(records)
        .map(|(entry, rec)| {
            if rec.clip_id != entry.clip_id {
                bail!("ingest output {} does not match manifest clip {}", rec.clip_id, entry.clip_id);
            }
            let clip = load_clip(&entry, &base)?.select_frames(&rec.retained)?;
            Ok((entry, clip))
        })
        .collect()
}

fn run_trajectory(config: &PipelineConfig, work_dir: &Path, out_dir: &Path) -> Result<usize> {
    let cfg = &config.trajectory;
    let base = manifest_dir(config);
    let ingest: Vec<IngestRecord> = read_jsonl_file(&Stage::Ingest.output_dir(work_dir).join("keyframes.jsonl"))?;
    let tracks_dir = out_dir.join("tracks");
    std::fs::create_dir_all(&tracks_dir)?;
    let mut knowledge = Vec::new();
    let mut summary = Vec::new();
    for ((entry, clip), rec) in retained_clips(config, work_dir)?.into_iter().zip(&ingest) {
        let raw: TrajectorySequence = match &cfg.external_command {
            Some(cmd) => {
                let tracker = ExternalCommandTracker { program: PathBuf::from(&cmd[0]), args: cmd[1..].to_vec() };
                let full = tracker.track(&entry.clip_id, &base.join(&entry.frame_dir))?;
                if full.num_frames() == rec.frames {
                    TrajectorySequence { frames: rec.retained.iter().map(|&i| full.frames[i].clone()).collect(), ..full }
                } else {
                    full
                }
            }
            None => reference_track(&clip, &cfg.tracker)?,
        };
        let details = serde_json::json!({ "retained_frames": rec.retained });
        write_trajectory_file(
            &tracks_dir.join(format!("{}.json", entry.clip_id)),
            &TrajectoryFile::from_sequence(&entry.clip_id, &raw, details),
        )?;
        let mut violations = 0;
        for f in 0..raw.num_frames() {
            if !validate_region_order(&raw.annotation(f))?.is_ok() {
                violations += 1;
            }
        }
        let prepared = prepare_trajectory(&raw, cfg.delta, cfg.normalization_order)?;
        summary.push(TrajectorySummary {
            clip_id: entry.clip_id.clone(),
            frames: raw.num_frames(),
            max_displacement_px: max_displacement(&raw)?,
            kept: prepared.is_some(),
            region_order_violations: violations,
        });
        if let Some(traj) = prepared {
            let phonetic_type = entry.task_label.phonetic_type();
            let phonetic_text = entry.phonetic_text.clone().unwrap_or_else(|| phonetic_type.to_string());
            knowledge.push(KnowledgeEntry {
                knowledge_id: entry.clip_id.clone(),
                clip_id: entry.clip_id.clone(),
                record: KnowledgeRecord::new(traj, phonetic_type, phonetic_text, entry.diagnostic_label.as_str())?,
            });
        }
    }
    write_jsonl(&out_dir.join("knowledge.jsonl"), &knowledge)?;
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(0)
}

fn run_forge(config: &PipelineConfig, work_dir: &Path, out_dir: &Path) -> Result<usize> {
    let store: Vec<KnowledgeEntry> =
        read_jsonl_file(&Stage::Trajectory.output_dir(work_dir).join("knowledge.jsonl"))?;
    if store.is_empty() {
        bail!("no clip passed the amplitude filter; nothing to generate from");
    }
    let gateway = build_gateway(&config.forge.gateway)?;
    let (records, report) = run_generation(
        &config.forge.generation,
        config.forge.seed,
        &store,
        &QuestionTemplatePool::builtin(),
        &gateway,
        &TrigramCosine,
    )?;
    write_dataset(&out_dir.join("dialogue.jsonl"), &records)?;
    write_json(&out_dir.join("report.json"), &report)?;
    Ok(0)
}

fn run_fuse(config: &PipelineConfig, work_dir: &Path, out_dir: &Path) -> Result<usize> {
    let cfg = &config.fusion;
    let base = manifest_dir(config);
    let weights = match &cfg.weights {
        Some(p) => ProjectionWeights::load(&config.resolve(p))?,
        None => cfg.model.seeded_weights(cfg.seed),
    };
    weights.save(&out_dir.join("weights.bin"))?;
    let seq_dir = out_dir.join("sequences");
    std::fs::create_dir_all(&seq_dir)?;
    let instruction = instruction_ids(&cfg.instruction);
    let mut index = Vec::new();
    for (entry, clip) in retained_clips(config, work_dir)? {
        let audio = match (&entry.audio_file, cfg.model.modality) {
            (_, Modality::UtiOnly) | (None, _) => None,
            (Some(a), _) => Some(read_wav(&base.join(a))?.0),
        };
        let seq = fuse_clip(&clip, audio.as_deref(), &instruction, &weights, &cfg.model)
            .with_context(|| format!("fusing clip {}", entry.clip_id))?;
        let file = format!("{}.seq", entry.clip_id);
        std::fs::write(seq_dir.join(&file), seq.to_bytes()?)?;
        index.push(FuseIndexEntry {
            clip_id: entry.clip_id.clone(),
            file: format!("sequences/{file}"),
            mode: seq.mode(),
            boundaries: seq.boundaries(),
            total_len: seq.total_len(),
        });
    }
    write_json(&out_dir.join("index.json"), &index)?;
    Ok(0)
}

fn run_eval(config: &PipelineConfig, work_dir: &Path, out_dir: &Path) -> Result<usize> {
    let (_, dialogue) = read_dataset(&Stage::Forge.output_dir(work_dir).join("dialogue.jsonl"))?;
    let mut predictions = Vec::new();
    let mut gold = Vec::new();
    for entry in load_entries(config)? {
        let Some(reference) = &entry.reference else { continue };
        let Some(record) = dialogue.iter().find(|r| r.clip_id == entry.clip_id && r.topic == config.eval.topic) else {
            continue;
        };
        predictions.push(Prediction { record_id: entry.clip_id.clone(), response: record.response.clone() });
        gold.push(GoldRecord {
            record_id: entry.clip_id.clone(),
            references: Vec::new(),
            reference: Some(reference.clone()),
            label: entry.diagnostic_label,
            context: Default::default(),
        });
    }
    if gold.is_empty() {
        bail!("no clip has both a reference text and a `{}` dialogue record", config.eval.topic);
    }
    write_jsonl(&out_dir.join("predictions.jsonl"), &predictions)?;
    write_jsonl(&out_dir.join("gold.jsonl"), &gold)?;
    write_eval_outputs(&predictions, &gold, config, out_dir)
}

/// Evaluates and writes `report.json` / `report.txt`; returns the number of
/// unparseable responses.
pub fn write_eval_outputs(
    predictions: &[Prediction],
    gold: &[GoldRecord],
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<usize> {
    let gateway = if config.eval.report.judge { Some(build_gateway(&config.eval.judge_gateway)?) } else { None };
    let outcome = evaluate(predictions, gold, &config.eval.report, gateway.as_ref())?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("report.json"), outcome.to_json() + "\n")?;
    std::fs::write(out_dir.join("report.txt"), outcome.render_text())?;
    Ok(outcome.unparseable.len())
}

fn count_unparseable(out_dir: &Path) -> Result<usize> {
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json"))?)?;
    Ok(report["unparseable"].as_array().map_or(0, Vec::len))
}
