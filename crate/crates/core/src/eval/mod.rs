//! Evaluation: NLG overlap metrics, diagnosis classification, judge scoring
//! and the report tables.

mod classify;
mod harness;
mod judge;
mod nlg;
mod report;

pub use classify::{classification_metrics, parse_label, ClassificationMetrics, ConfusionMatrix};
pub use harness::{
    evaluate, read_jsonl, write_jsonl, EvalConfig, EvalOutcome, GoldRecord, NlgMetric, Prediction, RecordScores,
};
pub use judge::{
    judge_prompt, judge_scores, mock_judge_reply, parse_judge_reply, summarize_scores, JudgeItem, JudgeRubric,
    JudgeSummary, JudgedItem, JUDGE_PROMPT_HEADER,
};
pub use nlg::{
    align_exact, bleu_n, lcs_len, meteor_exact, modified_precision, rouge_l, tokenize, Alignment, ROUGE_BETA,
};
pub use report::{build_report, from_units, to_units, MetricReport, ReportRow, DEFAULT_DECIMALS};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no reference texts")]
    NoReferences,
    #[error("{predicted} predictions vs {gold} gold labels")]
    LengthMismatch { predicted: usize, gold: usize },
    #[error("row {method} has {got} scores, expected {expected}")]
    RaggedRow { method: String, expected: usize, got: usize },
    #[error("gold record {0} has no prediction")]
    MissingPrediction(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
