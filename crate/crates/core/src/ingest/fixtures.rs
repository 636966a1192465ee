//! Synthetic moving-blob clips with known ground truth.
//!
//! Each clip is a bright Gaussian blob drifting over uniform speckle. The
//! blob center path is written alongside the frames so tracker and encoder
//! tests can compare against it directly.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{save_clip, write_manifest, ClipManifestEntry, DiagnosticLabel, IngestError, TaskLabel, UtiClip};

/// Audio sample rate of generated companion recordings.
pub const FIXTURE_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobParams {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub frame_rate: f64,
    /// Horizontal and vertical Gaussian widths in pixels.
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub amplitude: f64,
    /// Maximum speckle intensity.
    pub noise: f64,
    /// Center at the first and last frame, `(x, y)` in pixels.
    pub start: (f64, f64),
    pub end: (f64, f64),
    /// Amplitude in pixels of one vertical sine cycle over the clip.
    pub wobble: f64,
}

impl Default for BlobParams {
    fn default() -> Self {
        BlobParams {
            frames: 24,
            height: 56,
            width: 56,
            frame_rate: 60.0,
            sigma_x: 28.0,
            sigma_y: 2.5,
            amplitude: 0.8,
            noise: 0.15,
            start: (22.0, 34.0),
            end: (34.0, 22.0),
            wobble: 2.0,
        }
    }
}

impl BlobParams {
    /// Blob center at frame `t`.
    pub fn center(&self, t: usize) -> (f64, f64) {
        let s = if self.frames > 1 { t as f64 / (self.frames - 1) as f64 } else { 0.0 };
        let x = self.start.0 + (self.end.0 - self.start.0) * s;
        let y = self.start.1 + (self.end.1 - self.start.1) * s + self.wobble * (2.0 * PI * s).sin();
        (x, y)
    }
}

/// Ground-truth sidecar written next to every fixture clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobGroundTruth {
    pub clip_id: String,
    pub seed: u64,
    pub params: BlobParams,
    /// Blob center `[x, y]` per frame.
    pub centers: Vec<[f64; 2]>,
}

/// Renders one blob clip. Intensities are quantized to 8 bits so that the
/// in-memory clip equals what a PNG round trip reloads.
pub fn blob_clip(
    clip_id: &str,
    params: &BlobParams,
    seed: u64,
    task_label: TaskLabel,
    diagnostic_label: DiagnosticLabel,
) -> Result<(UtiClip, BlobGroundTruth), IngestError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t_len, h, w) = (params.frames, params.height, params.width);
    let mut frames = Array3::<f64>::zeros((t_len, h, w));
    let mut centers = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let (cx, cy) = params.center(t);
        centers.push([cx, cy]);
        for i in 0..h {
            for j in 0..w {
                let dx = j as f64 - cx;
                let dy = i as f64 - cy;
                let blob = params.amplitude
                    * (-(dx * dx) / (2.0 * params.sigma_x * params.sigma_x)
                        - (dy * dy) / (2.0 * params.sigma_y * params.sigma_y))
                        .exp();
                let speckle = params.noise * rng.random::<f64>();
                let v = (blob + speckle).clamp(0.0, 1.0);
                frames[[t, i, j]] = (v * 255.0).round() / 255.0;
            }
        }
    }
    let clip = UtiClip::new(
        clip_id,
        frames,
        params.frame_rate,
        format!("spk{:02}", seed % 7),
        task_label,
        diagnostic_label,
    )?;
    let truth = BlobGroundTruth { clip_id: clip_id.to_string(), seed, params: params.clone(), centers };
    Ok((clip, truth))
}

/// Companion audio: a tone whose pitch follows the blob height, with a
/// raised-cosine envelope. Deterministic.
pub fn blob_audio(truth: &BlobGroundTruth) -> Vec<f64> {
    let p = &truth.params;
    let seconds = p.frames as f64 / p.frame_rate;
    let n = (seconds * FIXTURE_SAMPLE_RATE as f64).round() as usize;
    let mut phase = 0.0;
    (0..n)
        .map(|i| {
            let frame = ((i as f64 / FIXTURE_SAMPLE_RATE as f64) * p.frame_rate) as usize;
            let y = truth.centers[frame.min(truth.centers.len() - 1)][1];
            let freq = 150.0 + 4.0 * (p.height as f64 - y);
            phase += 2.0 * PI * freq / FIXTURE_SAMPLE_RATE as f64;
            let env = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
            0.5 * env * phase.sin()
        })
        .collect()
}

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<(), IngestError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in samples {
        writer.write_sample((s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

/// Reads a mono WAV into samples in `[-1, 1]`; returns `(samples, sample_rate)`.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32), IngestError> {
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let max = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .step_by(spec.channels as usize)
                .map(|s| s.map(|v| v as f64 / max))
                .collect::<Result<_, _>>()
                .map_err(wav_err)?
        }
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .step_by(spec.channels as usize)
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
    };
    Ok((samples, spec.sample_rate))
}

fn wav_err(e: hound::Error) -> IngestError {
    match e {
        hound::Error::IoError(io) => IngestError::Io(io),
        other => IngestError::InvalidClip(format!("wav: {other}")),
    }
}

const PHONETIC_TEXTS: [(&str, TaskLabel); 10] = [
    ("/a/", TaskLabel::Monophthong),
    ("/i/", TaskLabel::Monophthong),
    ("/u/", TaskLabel::Monophthong),
    ("/ka/", TaskLabel::Monosyllable),
    ("/ta/", TaskLabel::Monosyllable),
    ("/la/", TaskLabel::Monosyllable),
    ("she sells sea shells", TaskLabel::Sentence),
    ("the red kite landed", TaskLabel::Sentence),
    ("dry swallow", TaskLabel::Swallowing),
    ("/e/", TaskLabel::Monophthong),
];

/// Paths written by [`generate_fixture_set`].
#[derive(Debug, Clone)]
pub struct FixtureSet {
    pub manifest: PathBuf,
    pub entries: Vec<ClipManifestEntry>,
    pub ground_truth: Vec<BlobGroundTruth>,
}

/// Motion direction of the blob from first to last frame, in articulatory
/// terms (image x grows anteriorly, image y grows inferiorly).
pub fn ground_truth_direction(truth: &BlobGroundTruth) -> String {
    let first = truth.centers[0];
    let last = truth.centers[truth.centers.len() - 1];
    crate::trajectory::motion_direction(last[0] - first[0], last[1] - first[1], 1e-9)
}

/// Writes `count` blob clips under `dir` (frames, ground truth, audio) plus a
/// `manifest.jsonl`. Motion direction, labels and phonetic content vary per
/// clip; everything is a function of `seed`.
pub fn generate_fixture_set(
    dir: &Path,
    count: usize,
    seed: u64,
    base: &BlobParams,
) -> Result<FixtureSet, IngestError> {
    std::fs::create_dir_all(dir.join("ground_truth"))?;
    std::fs::create_dir_all(dir.join("audio"))?;
    let mut entries = Vec::with_capacity(count);
    let mut truths = Vec::with_capacity(count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let clip_id = format!("clip{i:03}");
        let mut params = base.clone();
        let (w, h) = (base.width as f64, base.height as f64);
        // Start and end points inside the central region of the frame.
        let jitter = |rng: &mut ChaCha8Rng| 0.3 + 0.4 * rng.random::<f64>();
        params.start = (w * jitter(&mut rng), h * jitter(&mut rng));
        params.end = (w * jitter(&mut rng), h * jitter(&mut rng));
        params.wobble = base.wobble * rng.random::<f64>();
        let (phonetic_text, task) = PHONETIC_TEXTS[i % PHONETIC_TEXTS.len()];
        let diagnosis = if i % 3 == 2 { DiagnosticLabel::Dysarthric } else { DiagnosticLabel::Healthy };
        let clip_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
        let (clip, truth) = blob_clip(&clip_id, &params, clip_seed, task, diagnosis)?;

        let mut entry = save_clip(&clip, dir, Path::new("frames").join(&clip_id).as_path())?;
        let gt_path = dir.join("ground_truth").join(format!("{clip_id}.json"));
        serde_json::to_writer_pretty(BufWriter::new(File::create(&gt_path)?), &truth)?;
        let audio_rel = Path::new("audio").join(format!("{clip_id}.wav"));
        write_wav(&dir.join(&audio_rel), &blob_audio(&truth), FIXTURE_SAMPLE_RATE)?;

        let direction = ground_truth_direction(&truth);
        entry.phonetic_text = Some(phonetic_text.to_string());
        entry.audio_file = Some(audio_rel);
        entry.reference = Some(format!(
            "the tongue moves {} while producing {}. assessment: {} speech.",
            direction.replace('-', " and "),
            phonetic_text,
            diagnosis
        ));
        entries.push(entry);
        truths.push(truth);
    }
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&manifest, &entries)?;
    Ok(FixtureSet { manifest, entries, ground_truth: truths })
}

pub fn load_ground_truth(path: &Path) -> Result<BlobGroundTruth, IngestError> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_clip, load_manifest};

    #[test]
    fn fixture_round_trips_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let set = generate_fixture_set(dir.path(), 3, 42, &BlobParams::default()).unwrap();
        let entries = load_manifest(&set.manifest).unwrap();
        assert_eq!(entries, set.entries);
        for entry in &entries {
            let first = load_clip(entry, dir.path()).unwrap();
            let out = tempfile::tempdir().unwrap();
            let resaved = save_clip(&first, out.path(), Path::new("x")).unwrap();
            let second = load_clip(&resaved, out.path()).unwrap();
            assert_eq!(first.frames.as_slice().unwrap().len(), second.frames.len());
            assert!(first
                .frames
                .iter()
                .zip(second.frames.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn generated_clip_matches_in_memory_render() {
        let dir = tempfile::tempdir().unwrap();
        let set = generate_fixture_set(dir.path(), 1, 7, &BlobParams::default()).unwrap();
        let truth = &set.ground_truth[0];
        let (clip, _) = blob_clip(
            "clip000",
            &truth.params,
            truth.seed,
            set.entries[0].task_label,
            set.entries[0].diagnostic_label,
        )
        .unwrap();
        let loaded = load_clip(&set.entries[0], dir.path()).unwrap();
        assert_eq!(loaded.frames, clip.frames);
        let gt = load_ground_truth(&dir.path().join("ground_truth/clip000.json")).unwrap();
        assert_eq!(&gt, truth);
    }

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<f64> = (0..100).map(|i| (i as f64 / 10.0).sin() * 0.5).collect();
        let path = dir.path().join("a.wav");
        write_wav(&path, &samples, 16_000).unwrap();
        let (back, sr) = read_wav(&path).unwrap();
        assert_eq!(sr, 16_000);
        assert!(samples.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-4));
    }
}
