//! Content hashing and the append-only run manifest that chains stages.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const RUN_MANIFEST: &str = "run_manifest.jsonl";

/// Incremental SHA-256 over labelled byte strings. Each part is length
/// prefixed so concatenation boundaries cannot collide.
#[derive(Default)]
pub struct ContentHasher(Sha256);

impl ContentHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn part(&mut self, label: &str, bytes: &[u8]) -> &mut Self {
        for chunk in [label.as_bytes(), bytes] {
            self.0.update((chunk.len() as u64).to_le_bytes());
            self.0.update(chunk);
        }
        self
    }

    pub fn file(&mut self, label: &str, path: &Path) -> std::io::Result<&mut Self> {
        let bytes = std::fs::read(path)?;
        Ok(self.part(label, &bytes))
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Every regular file under `dir`, sorted by relative path with `/`
/// separators.
pub fn list_files(dir: &Path) -> std::io::Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("under dir");
                let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                out.push((rel, path));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Hash of a directory's file names and contents; `None` if it does not
/// exist or is empty.
pub fn hash_dir(dir: &Path) -> std::io::Result<Option<String>> {
    if !dir.is_dir() {
        return Ok(None);
    }
    let files = list_files(dir)?;
    if files.is_empty() {
        return Ok(None);
    }
    let mut h = ContentHasher::new();
    for (rel, path) in files {
        h.file(&rel, &path)?;
    }
    Ok(Some(h.finish()))
}

pub fn hash_json<T: Serialize>(value: &T) -> String {
    let mut h = ContentHasher::new();
    h.part("json", &serde_json::to_vec(value).expect("value serializes"));
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: String,
    pub inputs_hash: String,
    pub outputs_hash: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub duration_ms: u64,
}

pub fn read_run_manifest(work_dir: &Path) -> anyhow::Result<Vec<ManifestEntry>> {
    let path = work_dir.join(RUN_MANIFEST);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(&path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1)))
        .collect()
}

pub fn append_run_manifest(work_dir: &Path, entry: &ManifestEntry) -> anyhow::Result<()> {
    std::fs::create_dir_all(work_dir)?;
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(work_dir.join(RUN_MANIFEST))?;
    writeln!(f, "{}", serde_json::to_string(entry)?)?;
    Ok(())
}

/// Most recent entry for `stage`.
pub fn latest<'a>(entries: &'a [ManifestEntry], stage: &str) -> Option<&'a ManifestEntry> {
    entries.iter().rev().find(|e| e.stage == stage)
}
