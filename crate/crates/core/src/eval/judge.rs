//! Rubric-based scoring of responses by a judge model behind the gateway.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{tokenize, EvalError};
use crate::gateway::Gateway;
use crate::numeric::exact_mean;

pub const JUDGE_PROMPT_HEADER: &str = "You are grading an answer from a speech rehabilitation assistant.";
const REPROMPT_SUFFIX: &str =
    "\nYour previous reply could not be parsed. Reply with exactly one line `<dimension>: <score>` per dimension.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRubric {
    pub dimensions: Vec<String>,
    pub min_score: u8,
    pub max_score: u8,
}

impl JudgeRubric {
    /// Dimensions used by the model judge.
    pub fn llm() -> Self {
        Self::with_dimensions(&["correctness", "trajectory_consistency", "completeness"])
    }

    /// Dimensions used by the human expert panel.
    pub fn human() -> Self {
        Self::with_dimensions(&["consistency", "correctness", "usefulness"])
    }

    fn with_dimensions(dims: &[&str]) -> Self {
        JudgeRubric { dimensions: dims.iter().map(|d| d.to_string()).collect(), min_score: 1, max_score: 5 }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.dimensions.is_empty() || self.min_score > self.max_score {
            return Err(EvalError::InvalidInput("rubric needs dimensions and min <= max".into()));
        }
        Ok(())
    }
}

/// One response to be judged with the facts it should reflect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeItem {
    pub record_id: String,
    pub context: BTreeMap<String, String>,
    pub response: String,
}

fn section(name: &str, body: &str) -> String {
    format!("<{name}>\n{body}\n</{name}>\n")
}

pub fn judge_prompt(rubric: &JudgeRubric, item: &JudgeItem) -> String {
    let mut p = String::new();
    p.push_str(JUDGE_PROMPT_HEADER);
    p.push('\n');
    p.push_str(&format!(
        "Score each dimension from {} to {}: {}.\n",
        rubric.min_score,
        rubric.max_score,
        rubric.dimensions.join(", ")
    ));
    p.push_str("Reply with one line `<dimension>: <score>` per dimension.\n");
    p.push_str(&section("context", &serde_json::to_string(&item.context).expect("map serializes")));
    p.push_str(&section("response", &serde_json::to_string(&item.response).expect("string serializes")));
    p
}

/// Integer score per dimension, or `None` unless every dimension has exactly
/// one in-range score.
pub fn parse_judge_reply(reply: &str, rubric: &JudgeRubric) -> Option<Vec<u8>> {
    let mut found: BTreeMap<&str, u8> = BTreeMap::new();
    for line in reply.lines() {
        let Some((name, value)) = line.split_once(':') else { continue };
        let name = name.trim().trim_matches('`').to_lowercase();
        let Some(dim) = rubric.dimensions.iter().find(|d| **d == name) else { continue };
        let score: u8 = value.trim().trim_matches('`').parse().ok()?;
        if score < rubric.min_score || score > rubric.max_score || found.insert(dim.as_str(), score).is_some() {
            return None;
        }
    }
    rubric.dimensions.iter().map(|d| found.get(d.as_str()).copied()).collect()
}

fn extract_section<'a>(prompt: &'a str, name: &str) -> Option<&'a str> {
    let open = format!("<{name}>\n");
    let close = format!("\n</{name}>");
    let start = prompt.find(&open)? + open.len();
    let len = prompt[start..].find(&close)?;
    Some(&prompt[start..start + len])
}

/// The mock backend's judge: every dimension gets
/// `min + round((max - min) * coverage)`, where coverage is the fraction of
/// context fields whose tokens all appear in the response.
pub fn mock_judge_reply(prompt: &str) -> Option<String> {
    if !prompt.starts_with(JUDGE_PROMPT_HEADER) {
        return None;
    }
    let scale_line = prompt.lines().nth(1)?;
    let rest = scale_line.strip_prefix("Score each dimension from ")?;
    let (range, dims) = rest.split_once(": ")?;
    let (lo, hi) = range.split_once(" to ")?;
    let (lo, hi): (u8, u8) = (lo.parse().ok()?, hi.parse().ok()?);
    let dims: Vec<&str> = dims.trim_end_matches('.').split(", ").collect();
    let context: BTreeMap<String, String> = serde_json::from_str(extract_section(prompt, "context")?).ok()?;
    let response: String = serde_json::from_str(extract_section(prompt, "response")?).ok()?;

    let words: HashSet<String> = tokenize(&response).into_iter().collect();
    let fields: Vec<Vec<String>> = context.values().map(|v| tokenize(v)).filter(|t| !t.is_empty()).collect();
    let covered = fields.iter().filter(|f| f.iter().all(|w| words.contains(w))).count();
    let coverage = if fields.is_empty() || words.is_empty() { 0.0 } else { covered as f64 / fields.len() as f64 };
    let score = lo + (f64::from(hi - lo) * coverage).round() as u8;
    Some(dims.iter().map(|d| format!("{d}: {score}")).collect::<Vec<_>>().join("\n"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedItem {
    pub record_id: String,
    /// `None` when the judge reply stayed unparseable after one reprompt.
    pub scores: Option<Vec<u8>>,
    pub reprompted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeSummary {
    pub dimensions: Vec<String>,
    /// Mean per dimension over scored items; `None` if none were scored.
    pub means: Vec<Option<f64>>,
    pub scored: usize,
    pub missing: usize,
    pub items: Vec<JudgedItem>,
}

fn judge_one(item: &JudgeItem, rubric: &JudgeRubric, gateway: &Gateway) -> JudgedItem {
    let prompt = judge_prompt(rubric, item);
    let mut reprompted = false;
    for attempt in [prompt.clone(), format!("{prompt}{REPROMPT_SUFFIX}")] {
        match gateway.generate(&attempt, 0.0) {
            Ok(reply) => {
                if let Some(scores) = parse_judge_reply(&reply.text, rubric) {
                    return JudgedItem { record_id: item.record_id.clone(), scores: Some(scores), reprompted, error: None };
                }
            }
            Err(e) => {
                return JudgedItem {
                    record_id: item.record_id.clone(),
                    scores: None,
                    reprompted,
                    error: Some(e.to_string()),
                }
            }
        }
        reprompted = true;
    }
    JudgedItem { record_id: item.record_id.clone(), scores: None, reprompted, error: None }
}

/// Means of per-dimension scores; missing items are excluded and counted.
pub fn summarize_scores(rubric: &JudgeRubric, items: Vec<JudgedItem>) -> JudgeSummary {
    let scored: Vec<&Vec<u8>> = items.iter().filter_map(|i| i.scores.as_ref()).collect();
    let means = (0..rubric.dimensions.len())
        .map(|d| exact_mean(&scored.iter().map(|s| f64::from(s[d])).collect::<Vec<_>>()))
        .collect();
    JudgeSummary {
        dimensions: rubric.dimensions.clone(),
        means,
        scored: scored.len(),
        missing: items.len() - scored.len(),
        items,
    }
}

/// Judges every item with at most `concurrency` gateway calls in flight;
/// results keep input order.
pub fn judge_scores(
    items: &[JudgeItem],
    rubric: &JudgeRubric,
    gateway: &Gateway,
    concurrency: usize,
) -> Result<JudgeSummary, EvalError> {
    rubric.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .map_err(|e| EvalError::InvalidInput(e.to_string()))?;
    let judged: Vec<JudgedItem> = pool.install(|| items.par_iter().map(|i| judge_one(i, rubric, gateway)).collect());
    Ok(summarize_scores(rubric, judged))
}
