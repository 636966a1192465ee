//! Joins predictions with gold records and produces the metric reports.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    bleu_n, build_report, classification_metrics, judge_scores, meteor_exact, parse_label, rouge_l, tokenize,
    ClassificationMetrics, EvalError, JudgeItem, JudgeRubric, JudgeSummary, MetricReport, DEFAULT_DECIMALS,
};
use crate::gateway::Gateway;
use crate::ingest::DiagnosticLabel;
use crate::numeric::exact_mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub record_id: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub record_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub label: DiagnosticLabel,
    /// Facts shown to the judge; defaults to the label and references.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub context: BTreeMap<String, String>,
}

impl GoldRecord {
    pub fn all_references(&self) -> Vec<&str> {
        self.reference.iter().chain(&self.references).map(String::as_str).collect()
    }

    fn judge_context(&self) -> BTreeMap<String, String> {
        if !self.context.is_empty() {
            return self.context.clone();
        }
        let mut ctx = BTreeMap::new();
        ctx.insert("diagnostic_label".to_string(), self.label.to_string());
        for (i, r) in self.all_references().into_iter().enumerate() {
            ctx.insert(format!("reference_{}", i + 1), r.to_string());
        }
        ctx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlgMetric {
    Bleu1,
    Bleu2,
    Bleu3,
    Meteor,
    RougeL,
}

impl NlgMetric {
    pub const ALL: [NlgMetric; 5] = [NlgMetric::Bleu1, NlgMetric::Bleu2, NlgMetric::Bleu3, NlgMetric::Meteor, NlgMetric::RougeL];

    pub fn column(self) -> &'static str {
        match self {
            NlgMetric::Bleu1 => "BLEU-1",
            NlgMetric::Bleu2 => "BLEU-2",
            NlgMetric::Bleu3 => "BLEU-3",
            NlgMetric::Meteor => "METEOR",
            NlgMetric::RougeL => "ROUGE-L",
        }
    }

    fn score(self, cand: &[String], refs: &[Vec<String>]) -> Result<f64, EvalError> {
        match self {
            NlgMetric::Bleu1 => bleu_n(cand, refs, 1),
            NlgMetric::Bleu2 => bleu_n(cand, refs, 2),
            NlgMetric::Bleu3 => bleu_n(cand, refs, 3),
            NlgMetric::Meteor => meteor_exact(cand, refs),
            NlgMetric::RougeL => rouge_l(cand, refs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<NlgMetric>,
    #[serde(default = "default_true")]
    pub judge: bool,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_decimals")]
    pub decimals: u32,
    #[serde(default)]
    pub dataset_id: String,
    #[serde(default)]
    pub split: String,
}

fn default_method() -> String {
    "model".into()
}
fn default_metrics() -> Vec<NlgMetric> {
    NlgMetric::ALL.to_vec()
}
fn default_true() -> bool {
    true
}
fn default_concurrency() -> usize {
    4
}
fn default_decimals() -> u32 {
    DEFAULT_DECIMALS
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            method: default_method(),
            metrics: default_metrics(),
            judge: true,
            concurrency: default_concurrency(),
            decimals: default_decimals(),
            dataset_id: String::new(),
            split: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordScores {
    pub record_id: String,
    pub nlg: Vec<f64>,
    pub predicted_label: Option<DiagnosticLabel>,
    pub gold_label: DiagnosticLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub nlg: Option<MetricReport>,
    pub classification: MetricReport,
    pub classification_detail: ClassificationMetrics,
    pub judge: Option<MetricReport>,
    pub judge_summary: Option<JudgeSummary>,
    pub records: Vec<RecordScores>,
    /// Records whose response yielded no diagnostic label.
    pub unparseable: Vec<String>,
}

impl EvalOutcome {
    pub fn render_text(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        if let Some(r) = &self.nlg {
            parts.push(r.render_text());
        }
        parts.push(self.classification.render_text());
        if let Some(r) = &self.judge {
            parts.push(r.render_text());
        }
        if !self.unparseable.is_empty() {
            parts.push(format!("unparseable responses: {}\n", self.unparseable.join(", ")));
        }
        parts.join("\n")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serializes")
    }
}

fn metadata(config: &EvalConfig) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("dataset".into(), config.dataset_id.clone());
    m.insert("split".into(), config.split.clone());
    m.insert("aggregation".into(), "sentence-level, macro-averaged".into());
    m.insert("meteor".into(), "exact matches only (no stem or synonym stages)".into());
    m.insert("bleu_smoothing".into(), "add-one on zero counts for orders > 1".into());
    m
}

/// Scores every gold record against its prediction.
pub fn evaluate(
    predictions: &[Prediction],
    gold: &[GoldRecord],
    config: &EvalConfig,
    gateway: Option<&Gateway>,
) -> Result<EvalOutcome, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::InvalidInput("gold file has no records".into()));
    }
    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    for p in predictions {
        if by_id.insert(p.record_id.as_str(), p).is_some() {
            return Err(EvalError::InvalidInput(format!("duplicate prediction {}", p.record_id)));
        }
    }
    let pairs: Vec<(&GoldRecord, &Prediction)> = gold
        .iter()
        .map(|g| {
            by_id.get(g.record_id.as_str()).map(|p| (g, *p)).ok_or_else(|| EvalError::MissingPrediction(g.record_id.clone()))
        })
        .collect::<Result<_, _>>()?;
    if pairs.len() != predictions.len() {
        let known: std::collections::HashSet<&str> = gold.iter().map(|g| g.record_id.as_str()).collect();
        let extra = predictions.iter().find(|p| !known.contains(p.record_id.as_str())).expect("count differs");
        return Err(EvalError::InvalidInput(format!("prediction {} has no gold record", extra.record_id)));
    }

    let records: Vec<RecordScores> = pairs
        .par_iter()
        .map(|(g, p)| {
            let cand = tokenize(&p.response);
            let nlg = if config.metrics.is_empty() {
                Vec::new()
            } else {
                let refs: Vec<Vec<String>> = g.all_references().iter().map(|r| tokenize(r)).collect();
                if refs.is_empty() {
                    return Err(EvalError::NoReferences);
                }
                if cand.is_empty() {
                    vec![0.0; config.metrics.len()]
                } else {
                    config.metrics.iter().map(|m| m.score(&cand, &refs)).collect::<Result<_, _>>()?
                }
            };
            Ok(RecordScores {
                record_id: g.record_id.clone(),
                nlg,
                predicted_label: parse_label(&p.response),
                gold_label: g.label,
            })
        })
        .collect::<Result<_, EvalError>>()?;

    let meta = metadata(config);
    let nlg = if config.metrics.is_empty() {
        None
    } else {
        let means: Vec<f64> = (0..config.metrics.len())
            .map(|k| exact_mean(&records.iter().map(|r| r.nlg[k]).collect::<Vec<_>>()).expect("records non-empty"))
            .collect();
        let columns: Vec<&str> = config.metrics.iter().map(|m| m.column()).collect();
        let mut r = build_report("NLG metrics", &columns, &[(config.method.as_str(), means)], config.decimals)?;
        r.metadata = meta.clone();
        Some(r)
    };

    let predicted: Vec<Option<DiagnosticLabel>> = records.iter().map(|r| r.predicted_label).collect();
    let gold_labels: Vec<DiagnosticLabel> = records.iter().map(|r| r.gold_label).collect();
    let detail = classification_metrics(&predicted, &gold_labels)?;
    let mut classification = build_report(
        "Dysarthria assessment",
        &["Accuracy", "F1"],
        &[(config.method.as_str(), vec![detail.accuracy, detail.f1])],
        config.decimals,
    )?;
    classification.metadata = meta.clone();
    classification.metadata.insert("positive_class".into(), "dysarthric".into());

    let (judge, judge_summary) = match (config.judge, gateway) {
        (true, Some(gw)) => {
            let rubric = JudgeRubric::llm();
            let items: Vec<JudgeItem> = pairs
                .iter()
                .map(|(g, p)| JudgeItem { record_id: g.record_id.clone(), context: g.judge_context(), response: p.response.clone() })
                .collect();
            let summary = judge_scores(&items, &rubric, gw, config.concurrency)?;
            let report = if summary.means.iter().all(Option::is_some) {
                let dims: Vec<&str> = rubric.dimensions.iter().map(String::as_str).collect();
                let means = summary.means.iter().map(|m| m.expect("checked")).collect();
                let mut r = build_report("Judge scores", &dims, &[(config.method.as_str(), means)], config.decimals)?;
                r.metadata.insert("scale".into(), format!("{}-{}", rubric.min_score, rubric.max_score));
                r.metadata.insert("missing".into(), summary.missing.to_string());
                r.metadata.insert("backend".into(), gw.backend_id().to_string());
                Some(r)
            } else {
                None
            };
            (report, Some(summary))
        }
        _ => (None, None),
    };

    let unparseable = records.iter().filter(|r| r.predicted_label.is_none()).map(|r| r.record_id.clone()).collect();
    Ok(EvalOutcome {
        nlg,
        classification,
        classification_detail: detail,
        judge,
        judge_summary,
        records,
        unparseable,
    })
}

/// Reads a JSONL file, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EvalError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EvalError> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}
