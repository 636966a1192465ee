//! Knowledge-grounded prompt assembly for the doctor agent, and the parser the
//! mock backend uses to answer such prompts offline.

use serde::{Deserialize, Serialize};

use super::KnowledgeRecord;
use crate::trajectory::{to_fixed_json, Point, Region, TrajectorySequence};

/// First line of every knowledge prompt.
pub const DOCTOR_PROMPT_HEADER: &str =
    "You are a speech rehabilitation doctor. Answer the patient's question using the knowledge sections below.";

/// Section names, in the order they appear in the prompt.
pub const SECTIONS: [&str; 4] = ["trajectory", "phonetic_type", "phonetic_text", "diagnostic_label"];

/// Displacement below which a region counts as stationary in unit space.
const DIRECTION_EPS: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrajectorySection {
    #[serde(rename = "P")]
    points_per_region: usize,
    frame_indices: Vec<usize>,
    points: Vec<Vec<Point>>,
}

/// Frame indices kept when at most `max_frames` frames may be shown: a
/// uniform stride of `ceil(T / max_frames)` starting at 0.
pub fn downsample_indices(num_frames: usize, max_frames: Option<usize>) -> Vec<usize> {
    let stride = match max_frames {
        Some(m) if m > 0 && num_frames > m => num_frames.div_ceil(m),
        _ => 1,
    };
    (0..num_frames).step_by(stride).collect()
}

fn section(name: &str, body: &str) -> String {
    format!("<{name}>\n{body}\n</{name}>\n")
}

fn quoted(text: &str) -> String {
    serde_json::to_string(text).expect("strings always serialize")
}

/// Builds the doctor prompt: header, the question, then the trajectory,
/// phonetic type, phonetic content and diagnostic label sections in that
/// order. Text fields are JSON-quoted so the layout cannot be forged by
/// their content.
pub fn assemble_knowledge_prompt(record: &KnowledgeRecord, question: &str, max_frames: Option<usize>) -> String {
    let traj = &record.trajectory;
    let frame_indices = downsample_indices(traj.num_frames(), max_frames);
    let body = TrajectorySection {
        points_per_region: traj.points_per_region,
        points: frame_indices.iter().map(|&i| traj.frames[i].clone()).collect(),
        frame_indices,
    };
    let mut prompt = String::new();
    prompt.push_str(DOCTOR_PROMPT_HEADER);
    prompt.push('\n');
    prompt.push_str(&format!("Question: {}\n", quoted(question)));
    prompt.push_str(&section(SECTIONS[0], &to_fixed_json(&body).expect("trajectory serializes")));
    prompt.push_str(&section(SECTIONS[1], &quoted(&record.phonetic_type)));
    prompt.push_str(&section(SECTIONS[2], &quoted(&record.phonetic_text)));
    prompt.push_str(&section(SECTIONS[3], &quoted(&record.diagnostic_label)));
    prompt
}

/// Fields recovered from a knowledge prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPrompt {
    pub question: String,
    pub points_per_region: usize,
    pub frame_indices: Vec<usize>,
    pub points: Vec<Vec<Point>>,
    pub phonetic_type: String,
    pub phonetic_text: String,
    pub diagnostic_label: String,
}

impl ParsedPrompt {
    /// Net motion direction of tip, body and root.
    pub fn region_directions(&self) -> Option<[String; 3]> {
        let seq = TrajectorySequence::new(
            self.points.clone(),
            self.points_per_region,
            crate::trajectory::CoordinateSpace::UnitNormalized,
            crate::trajectory::TrajectorySource::Manual,
        )
        .ok()?;
        Some(seq.region_directions(DIRECTION_EPS))
    }
}

fn take_section<'a>(rest: &mut &'a str, name: &str) -> Option<&'a str> {
    let open = format!("<{name}>\n");
    let close = format!("\n</{name}>\n");
    let body_start = rest.strip_prefix(open.as_str())?;
    let end = body_start.find(close.as_str())?;
    let body = &body_start[..end];
    *rest = &body_start[end + close.len()..];
    Some(body)
}

/// Inverse of [`assemble_knowledge_prompt`]; `None` if `prompt` is not a
/// knowledge prompt.
pub fn parse_knowledge_prompt(prompt: &str) -> Option<ParsedPrompt> {
    let mut rest = prompt.strip_prefix(DOCTOR_PROMPT_HEADER)?.strip_prefix('\n')?;
    let line_end = rest.find('\n')?;
    let question: String = serde_json::from_str(rest[..line_end].strip_prefix("Question: ")?).ok()?;
    rest = &rest[line_end + 1..];
    let traj: TrajectorySection = serde_json::from_str(take_section(&mut rest, SECTIONS[0])?).ok()?;
    let phonetic_type: String = serde_json::from_str(take_section(&mut rest, SECTIONS[1])?).ok()?;
    let phonetic_text: String = serde_json::from_str(take_section(&mut rest, SECTIONS[2])?).ok()?;
    let diagnostic_label: String = serde_json::from_str(take_section(&mut rest, SECTIONS[3])?).ok()?;
    if !rest.is_empty() {
        return None;
    }
    Some(ParsedPrompt {
        question,
        points_per_region: traj.points_per_region,
        frame_indices: traj.frame_indices,
        points: traj.points,
        phonetic_type,
        phonetic_text,
        diagnostic_label,
    })
}

/// Token asserting the diagnosis in mock replies, e.g. `ASSESSMENT=dysarthric`.
pub fn assessment_token(label: &str) -> String {
    format!("ASSESSMENT={}", label.trim().to_lowercase())
}

/// The mock backend's answer to a knowledge prompt.
pub fn mock_doctor_reply(parsed: &ParsedPrompt) -> String {
    let motion = match parsed.region_directions() {
        Some(dirs) => Region::ALL
            .iter()
            .zip(dirs.iter())
            .map(|(r, d)| format!("tongue {} {}", r.as_str(), d))
            .collect::<Vec<_>>()
            .join(", "),
        None => "trajectory unavailable".to_string(),
    };
    format!(
        "{}. For {} ({}) the tracked motion is: {}. The pattern is consistent with {} speech.",
        assessment_token(&parsed.diagnostic_label),
        parsed.phonetic_text,
        parsed.phonetic_type,
        motion,
        parsed.diagnostic_label
    )
}
