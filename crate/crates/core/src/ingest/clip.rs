use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskLabel {
    Monophthong,
    Monosyllable,
    Sentence,
    Swallowing,
}

impl TaskLabel {
    /// Human-readable phonetic type, as used in knowledge records.
    pub fn phonetic_type(self) -> &'static str {
        match self {
            TaskLabel::Monophthong => "Monophthong",
            TaskLabel::Monosyllable => "Monosyllable",
            TaskLabel::Sentence => "Sentence",
            TaskLabel::Swallowing => "Swallowing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticLabel {
    Healthy,
    Dysarthric,
}

impl DiagnosticLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticLabel::Healthy => "healthy",
            DiagnosticLabel::Dysarthric => "dysarthric",
        }
    }
}

impl std::fmt::Display for DiagnosticLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DiagnosticLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "healthy" => Ok(DiagnosticLabel::Healthy),
            "dysarthric" => Ok(DiagnosticLabel::Dysarthric),
            other => Err(format!("unknown diagnostic label {other:?}")),
        }
    }
}

/// Sample depth of the PNG frames a clip was decoded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => u8::MAX as f64,
            BitDepth::Sixteen => u16::MAX as f64,
        }
    }
}

/// A time-ordered stack of grayscale ultrasound frames, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtiClip {
    pub clip_id: String,
    /// Shape `(T, H, W)`.
    pub frames: Array3<f64>,
    pub frame_rate: f64,
    pub speaker_id: String,
    pub task_label: TaskLabel,
    pub diagnostic_label: DiagnosticLabel,
    pub bit_depth: BitDepth,
}

impl UtiClip {
    /// Builds a clip after checking the frame invariants.
    pub fn new(
        clip_id: impl Into<String>,
        frames: Array3<f64>,
        frame_rate: f64,
        speaker_id: impl Into<String>,
        task_label: TaskLabel,
        diagnostic_label: DiagnosticLabel,
    ) -> Result<Self, IngestError> {
        let clip = UtiClip {
            clip_id: clip_id.into(),
            frames,
            frame_rate,
            speaker_id: speaker_id.into(),
            task_label,
            diagnostic_label,
            bit_depth: BitDepth::Eight,
        };
        clip.validate()?;
        Ok(clip)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.frames.len_of(Axis(0)) == 0 {
            return Err(IngestError::EmptyClip { clip_id: self.clip_id.clone() });
        }
        let (_, h, w) = self.frames.dim();
        if h == 0 || w == 0 {
            return Err(IngestError::InvalidClip(format!("{} has zero-sized frames", self.clip_id)));
        }
        if let Some(v) = self.frames.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(IngestError::InvalidClip(format!(
                "{} has intensity {v} outside [0, 1]",
                self.clip_id
            )));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(IngestError::InvalidClip(format!(
                "{} has non-positive frame rate",
                self.clip_id
            )));
        }
        Ok(())
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len_of(Axis(0))
    }

    pub fn height(&self) -> usize {
        self.frames.dim().1
    }

    pub fn width(&self) -> usize {
        self.frames.dim().2
    }

    pub fn frame(&self, t: usize) -> ArrayView2<'_, f64> {
        self.frames.index_axis(Axis(0), t)
    }

    /// Row-major flattening of frame `t`.
    pub fn flat_frame(&self, t: usize) -> Vec<f64> {
        self.frame(t).iter().copied().collect()
    }

    /// New clip holding only the frames at `indices`, in the given order.
    pub fn select_frames(&self, indices: &[usize]) -> Result<UtiClip, IngestError> {
        if indices.is_empty() {
            return Err(IngestError::EmptyClip { clip_id: self.clip_id.clone() });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.num_frames()) {
            return Err(IngestError::InvalidClip(format!(
                "frame index {bad} out of range for {} frames",
                self.num_frames()
            )));
        }
        let mut clip = self.clone();
        clip.frames = self.frames.select(Axis(0), indices);
        Ok(clip)
    }
}

/// One row of the clip manifest (JSONL).
///
/// Exactly one of `frame_glob` and `frame_list` must be present. `frame_dir`
/// and `audio_file` are resolved relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipManifestEntry {
    pub clip_id: String,
    pub frame_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_glob: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_list: Option<Vec<String>>,
    pub frame_rate: f64,
    pub speaker_id: String,
    pub task_label: TaskLabel,
    pub diagnostic_label: DiagnosticLabel,
    /// Phonetic content of the utterance, e.g. `/a/`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phonetic_text: Option<String>,
    /// Mono 16-bit WAV recorded in parallel with the frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_file: Option<PathBuf>,
    /// Reference description of the tongue motion, used as the NLG gold text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

impl ClipManifestEntry {
    /// Frame files in time order.
    pub fn frame_paths(&self, base_dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
        let dir = base_dir.join(&self.frame_dir);
        match (&self.frame_glob, &self.frame_list) {
            (Some(pattern), None) => {
                let full = dir.join(pattern);
                let mut paths = Vec::new();
                for entry in glob::glob(&full.to_string_lossy())? {
                    paths.push(entry.map_err(|e| IngestError::Io(e.into()))?);
                }
                // Lexicographic filename order is time order.
                paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
                Ok(paths)
            }
            (None, Some(list)) => Ok(list.iter().map(|name| dir.join(name)).collect()),
            _ => Err(IngestError::Manifest(format!(
                "{}: exactly one of frame_glob / frame_list is required",
                self.clip_id
            ))),
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<Vec<ClipManifestEntry>, IngestError> {
    let reader = BufReader::new(File::open(path)?);
    let mut entries = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ClipManifestEntry = serde_json::from_str(&line)
            .map_err(|e| IngestError::Manifest(format!("line {}: {e}", lineno + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ClipManifestEntry]) -> Result<(), IngestError> {
    let mut out = BufWriter::new(File::create(path)?);
    for entry in entries {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn decode_png(path: &Path) -> Result<(Array2<f64>, BitDepth), IngestError> {
    if !path.is_file() {
        return Err(IngestError::MissingFile(path.to_path_buf()));
    }
    let file = BufReader::new(File::open(path)?);
    let decode_err = |source| IngestError::PngDecode { path: path.to_path_buf(), source };
    let mut reader = png::Decoder::new(file).read_info().map_err(decode_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| IngestError::UnsupportedFormat {
        path: path.to_path_buf(),
        detail: "image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(decode_err)?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(IngestError::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!("color type {:?}", info.color_type),
        });
    }
    let (h, w) = (info.height as usize, info.width as usize);
    let (values, depth): (Vec<f64>, _) = match info.bit_depth {
        png::BitDepth::Eight => (
            buf[..h * w].iter().map(|&v| v as f64 / BitDepth::Eight.max_value()).collect(),
            BitDepth::Eight,
        ),
        png::BitDepth::Sixteen => (
            buf[..h * w * 2]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / BitDepth::Sixteen.max_value())
                .collect(),
            BitDepth::Sixteen,
        ),
        other => {
            return Err(IngestError::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("bit depth {other:?}"),
            })
        }
    };
    let frame = Array2::from_shape_vec((h, w), values).expect("buffer length matches h*w");
    Ok((frame, depth))
}

fn encode_png(path: &Path, frame: ArrayView2<'_, f64>, depth: BitDepth) -> Result<(), IngestError> {
    let (h, w) = frame.dim();
    let out = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(out, w as u32, h as u32);
    encoder.set_color(png::ColorType::Grayscale);
    let max = depth.max_value();
    let data: Vec<u8> = match depth {
        BitDepth::Eight => {
            encoder.set_depth(png::BitDepth::Eight);
            frame.iter().map(|&v| (v.clamp(0.0, 1.0) * max).round() as u8).collect()
        }
        BitDepth::Sixteen => {
            encoder.set_depth(png::BitDepth::Sixteen);
            frame
                .iter()
                .flat_map(|&v| ((v.clamp(0.0, 1.0) * max).round() as u16).to_be_bytes())
                .collect()
        }
    };
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&data)?;
    writer.finish()?;
    Ok(())
}

/// Loads the frames referenced by `entry`; intensities are divided by the
/// sample type's maximum.
pub fn load_clip(entry: &ClipManifestEntry, base_dir: &Path) -> Result<UtiClip, IngestError> {
    let paths = entry.frame_paths(base_dir)?;
    if paths.is_empty() {
        return Err(IngestError::EmptyClip { clip_id: entry.clip_id.clone() });
    }
    let mut frames = Vec::with_capacity(paths.len());
    let mut depth = BitDepth::Eight;
    for (i, path) in paths.iter().enumerate() {
        let (frame, d) = decode_png(path)?;
        if i == 0 {
            depth = d;
        } else {
            let (want_h, want_w) = frames.first().map(Array2::dim).unwrap_or((0, 0));
            let (got_h, got_w) = frame.dim();
            if (got_h, got_w) != (want_h, want_w) {
                return Err(IngestError::DimensionMismatch {
                    path: path.clone(),
                    want_h,
                    want_w,
                    got_h,
                    got_w,
                });
            }
            if d != depth {
                // Mixed depths still decode to [0, 1]; keep the deepest for saving.
                depth = BitDepth::Sixteen;
            }
        }
        frames.push(frame);
    }
    let views: Vec<_> = frames.iter().map(|f| f.view()).collect();
    let stacked = ndarray::stack(Axis(0), &views).expect("equal frame shapes");
    let clip = UtiClip {
        clip_id: entry.clip_id.clone(),
        frames: stacked,
        frame_rate: entry.frame_rate,
        speaker_id: entry.speaker_id.clone(),
        task_label: entry.task_label,
        diagnostic_label: entry.diagnostic_label,
        bit_depth: depth,
    };
    clip.validate()?;
    Ok(clip)
}

/// Writes each frame as `frame_NNNNN.png` under `base_dir/frame_dir` and
/// returns a manifest entry (with a `frame_list`) that reloads the clip.
pub fn save_clip(
    clip: &UtiClip,
    base_dir: &Path,
    frame_dir: &Path,
) -> Result<ClipManifestEntry, IngestError> {
    clip.validate()?;
    let dir = base_dir.join(frame_dir);
    std::fs::create_dir_all(&dir)?;
    let mut names = Vec::with_capacity(clip.num_frames());
    for t in 0..clip.num_frames() {
        let name = format!("frame_{t:05}.png");
        encode_png(&dir.join(&name), clip.frame(t), clip.bit_depth)?;
        names.push(name);
    }
    Ok(ClipManifestEntry {
        clip_id: clip.clip_id.clone(),
        frame_dir: frame_dir.to_path_buf(),
        frame_glob: None,
        frame_list: Some(names),
        frame_rate: clip.frame_rate,
        speaker_id: clip.speaker_id.clone(),
        task_label: clip.task_label,
        diagnostic_label: clip.diagnostic_label,
        phonetic_text: None,
        audio_file: None,
        reference: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_clip(t: usize, h: usize, w: usize) -> UtiClip {
        let frames = Array3::from_shape_fn((t, h, w), |(k, i, j)| {
            ((k * 7 + i * 3 + j) % 256) as f64 / 255.0
        });
        UtiClip::new("c0", frames, 60.0, "spk", TaskLabel::Monophthong, DiagnosticLabel::Healthy)
            .unwrap()
    }

    #[test]
    fn loads_ten_frames() {
        let dir = tempfile::tempdir().unwrap();
        let clip = gradient_clip(10, 128, 128);
        let mut entry = save_clip(&clip, dir.path(), Path::new("c0")).unwrap();
        entry.frame_list = None;
        entry.frame_glob = Some("*.png".into());
        let loaded = load_clip(&entry, dir.path()).unwrap();
        assert_eq!(loaded.frames.dim(), (10, 128, 128));
        assert_eq!(loaded.frames, clip.frames);
    }

    #[test]
    fn mismatched_frame_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let clip = gradient_clip(3, 128, 128);
        let mut entry = save_clip(&clip, dir.path(), Path::new("c0")).unwrap();
        let odd = gradient_clip(1, 64, 128);
        encode_png(&dir.path().join("c0/odd.png"), odd.frame(0), BitDepth::Eight).unwrap();
        entry.frame_list.as_mut().unwrap().insert(1, "odd.png".into());
        let err = load_clip(&entry, dir.path()).unwrap_err();
        assert!(matches!(err, IngestError::DimensionMismatch { got_h: 64, .. }), "{err}");
    }

    #[test]
    fn missing_and_empty_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let clip = gradient_clip(2, 8, 8);
        let mut entry = save_clip(&clip, dir.path(), Path::new("c0")).unwrap();
        entry.frame_list.as_mut().unwrap().push("nope.png".into());
        assert!(matches!(load_clip(&entry, dir.path()), Err(IngestError::MissingFile(_))));

        entry.frame_list = None;
        entry.frame_glob = Some("*.bmp".into());
        assert!(matches!(load_clip(&entry, dir.path()), Err(IngestError::EmptyClip { .. })));

        entry.frame_glob = None;
        assert!(matches!(load_clip(&entry, dir.path()), Err(IngestError::Manifest(_))));
    }

    #[test]
    fn sixteen_bit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let frames = Array3::from_shape_fn((2, 4, 5), |(k, i, j)| {
            ((k * 1000 + i * 77 + j * 3131) % 65536) as f64 / 65535.0
        });
        let mut clip =
            UtiClip::new("c16", frames, 30.0, "s", TaskLabel::Sentence, DiagnosticLabel::Dysarthric)
                .unwrap();
        clip.bit_depth = BitDepth::Sixteen;
        let entry = save_clip(&clip, dir.path(), Path::new("c16")).unwrap();
        let loaded = load_clip(&entry, dir.path()).unwrap();
        assert_eq!(loaded, clip);
    }

    #[test]
    fn out_of_range_intensity_rejected() {
        let frames = Array3::from_elem((1, 2, 2), 1.5);
        assert!(UtiClip::new("x", frames, 30.0, "s", TaskLabel::Sentence, DiagnosticLabel::Healthy)
            .is_err());
    }

    #[test]
    fn manifest_rejects_unknown_keys() {
        let line = r#"{"clip_id":"a","frame_dir":"a","frame_glob":"*.png","frame_rate":60,"speaker_id":"s","task_label":"sentence","diagnostic_label":"healthy","bogus":1}"#;
        assert!(serde_json::from_str::<ClipManifestEntry>(line).is_err());
    }
}
