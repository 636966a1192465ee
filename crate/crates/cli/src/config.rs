//! The pipeline configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uti_core::eval::EvalConfig;
use uti_core::forge::{FilterOrder, ForgeConfig, Topic};
use uti_core::fusion::FusionConfig;
use uti_core::trajectory::TrackerConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config value at `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Clip manifest (JSONL); relative paths resolve against the config file.
    pub manifest: PathBuf,
    /// Directory holding every stage's outputs and the run manifest.
    pub work_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    /// Cluster count; `min(100, frames)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub variance_percentile: f64,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection { k: None, seed: 0, restarts: 5, max_iters: 300, variance_percentile: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    pub tracker: TrackerConfig,
    pub normalization_order: FilterOrder,
    pub delta: f64,
    /// Program and arguments of an external tracker; `{clip_id}` and
    /// `{frame_dir}` are substituted. The reference tracker runs when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external_command: Option<Vec<String>>,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        TrajectorySection {
            tracker: TrackerConfig::default(),
            normalization_order: FilterOrder::default(),
            delta: 0.05,
            external_command: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    pub backend: BackendKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub model: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
}

impl Default for GatewaySection {
    fn default() -> Self {
        GatewaySection { backend: BackendKind::Mock, endpoint: None, model: "deepseek-v3".into(), timeout_ms: 60_000, max_retries: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeSection {
    pub seed: u64,
    pub gateway: GatewaySection,
    pub generation: ForgeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub seed: u64,
    pub instruction: String,
    /// Projection weights to load instead of seeded initialization.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    pub model: FusionConfig,
}

impl Default for FusionSection {
    fn default() -> Self {
        FusionSection {
            seed: 0,
            instruction: "Describe the tongue movement and assess the speech.".into(),
            weights: None,
            model: FusionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Dialogue topic whose responses are scored against the clip references.
    pub topic: Topic,
    pub judge_gateway: GatewaySection,
    pub report: EvalConfig,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { topic: Topic::TongueMotionAnalysis, judge_gateway: GatewaySection::default(), report: EvalConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub forge: ForgeSection,
    #[serde(default)]
    pub fusion: FusionSection,
    #[serde(default)]
    pub eval: EvalSection,
    /// Directory the relative paths resolve against; set when loading.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn new(manifest: impl Into<PathBuf>, work_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            paths: PathsConfig { manifest: manifest.into(), work_dir: work_dir.into() },
            ingest: IngestSection::default(),
            trajectory: TrajectorySection::default(),
            forge: ForgeSection::default(),
            fusion: FusionSection::default(),
            eval: EvalSection::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut config: PipelineConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.resolve(&self.paths.manifest)
    }

    pub fn work_dir(&self) -> PathBuf {
        self.resolve(&self.paths.work_dir)
    }

    /// Checks every numeric bound, naming the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let i = &self.ingest;
        if i.k == Some(0) {
            return Err(invalid("ingest.k", "must be >= 1"));
        }
        if i.restarts == 0 {
            return Err(invalid("ingest.restarts", "must be >= 1"));
        }
        if i.max_iters == 0 {
            return Err(invalid("ingest.max_iters", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&i.variance_percentile) {
            return Err(invalid("ingest.variance_percentile", "must be in [0, 1]"));
        }
        let t = &self.trajectory;
        if t.tracker.points_per_region == 0 {
            return Err(invalid("trajectory.tracker.points_per_region", "must be >= 1"));
        }
        if t.tracker.smoothing_window == 0 || t.tracker.smoothing_window.is_multiple_of(2) {
            return Err(invalid("trajectory.tracker.smoothing_window", "must be odd"));
        }
        if !(t.delta >= 0.0) {
            return Err(invalid("trajectory.delta", "must be >= 0"));
        }
        if t.external_command.as_ref().is_some_and(Vec::is_empty) {
            return Err(invalid("trajectory.external_command", "needs at least the program"));
        }
        let g = &self.forge.generation;
        let a = &g.acceptance;
        if !(0.1..=1.0).contains(&a.temperature) {
            return Err(invalid("forge.generation.acceptance.temperature", "must be in [0.1, 1.0]"));
        }
        if !(0.0..=1.0).contains(&a.threshold) {
            return Err(invalid("forge.generation.acceptance.threshold", "must be in [0, 1]"));
        }
        if a.max_retries == 0 {
            return Err(invalid("forge.generation.acceptance.max_retries", "must be >= 1"));
        }
        if g.concurrency == 0 {
            return Err(invalid("forge.generation.concurrency", "must be >= 1"));
        }
        if g.max_prompt_frames == Some(0) {
            return Err(invalid("forge.generation.max_prompt_frames", "must be >= 1"));
        }
        for (key, gw) in [("forge.gateway", &self.forge.gateway), ("eval.judge_gateway", &self.eval.judge_gateway)] {
            if gw.backend == BackendKind::Http && gw.endpoint.is_none() {
                return Err(invalid(&format!("{key}.endpoint"), "required for the http backend"));
            }
        }
        let m = &self.fusion.model;
        if m.patch_size == 0 {
            return Err(invalid("fusion.model.patch_size", "must be >= 1"));
        }
        if m.patch_dim == 0 || m.embed_dim == 0 {
            return Err(invalid("fusion.model", "patch_dim and embed_dim must be >= 1"));
        }
        m.speech.validate().map_err(|e| invalid("fusion.model.speech", e.to_string()))?;
        if self.fusion.instruction.is_empty() {
            return Err(invalid("fusion.instruction", "must not be empty"));
        }
        if self.eval.report.concurrency == 0 {
            return Err(invalid("eval.report.concurrency", "must be >= 1"));
        }
        if self.eval.report.decimals > 12 {
            return Err(invalid("eval.report.decimals", "must be <= 12"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = PipelineConfig::from_toml_str(
            "[paths]\nmanifest = \"m.jsonl\"\nwork_dir = \"work\"\n",
            Path::new("/tmp/x/utikit.toml"),
        )
        .unwrap();
        assert_eq!(c.manifest_path(), Path::new("/tmp/x/m.jsonl"));
        assert_eq!(c.ingest.variance_percentile, 0.2);
        assert_eq!(c.fusion.model.lora_rank, 64);
        assert_eq!(c.fusion.model.lora_alpha, 128);
        assert_eq!(c.forge.generation.acceptance.threshold, 0.3);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[paths]\nmanifest = \"m\"\nwork_dir = \"w\"\n[forge.generation.acceptance]\nthreshhold = 0.2\n";
        let err = PipelineConfig::from_toml_str(text, Path::new("c.toml")).unwrap_err().to_string();
        assert!(err.contains("threshhold"), "{err}");
    }

    #[test]
    fn bounds_report_key_path() {
        let text = "[paths]\nmanifest = \"m\"\nwork_dir = \"w\"\n[forge.generation.acceptance]\ntemperature = 0.05\n";
        let err = PipelineConfig::from_toml_str(text, Path::new("c.toml")).unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "forge.generation.acceptance.temperature"));
    }

    #[test]
    fn round_trip() {
        let mut c = PipelineConfig::new("m.jsonl", "work");
        c.ingest.k = Some(7);
        c.trajectory.external_command = Some(vec!["tracker".into(), "{clip_id}".into()]);
        c.forge.gateway.endpoint = Some("http://localhost:1".into());
        c.forge.generation.topics = vec![Topic::RehabilitationAdvice];
        let text = c.to_toml_string();
        let back = PipelineConfig::from_toml_str(&text, Path::new("c.toml")).unwrap();
        assert_eq!(back.to_toml_string(), text);
        assert_eq!(PipelineConfig { base_dir: PathBuf::new(), ..back }, c);
    }
}
