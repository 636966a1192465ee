//! Diagnostic label extraction from free text and binary classification
//! metrics with dysarthric as the positive class.

use serde::{Deserialize, Serialize};

use super::{tokenize, EvalError};
use crate::ingest::DiagnosticLabel;

const DYSARTHRIC_WORDS: [&str; 6] = ["dysarthric", "dysarthria", "impaired", "disordered", "slurred", "pathological"];
const HEALTHY_WORDS: [&str; 3] = ["healthy", "normal", "typical"];
const NEGATIONS: [&str; 4] = ["no", "not", "without", "non"];

/// Reads a diagnosis from a response. An explicit `ASSESSMENT=<label>`
/// token wins; otherwise keyword evidence is tallied, with a dysarthria
/// keyword directly after a negation counting as healthy. Mixed or missing
/// evidence yields `None`.
pub fn parse_label(text: &str) -> Option<DiagnosticLabel> {
    if let Some(pos) = text.find("ASSESSMENT=") {
        let rest = &text[pos + "ASSESSMENT=".len()..];
        let word: String = rest.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
        return word.to_lowercase().parse().ok();
    }
    let tokens = tokenize(text);
    let (mut healthy, mut dysarthric) = (false, false);
    for (i, tok) in tokens.iter().enumerate() {
        let negated = i > 0 && NEGATIONS.contains(&tokens[i - 1].as_str());
        if DYSARTHRIC_WORDS.contains(&tok.as_str()) {
            if negated {
                healthy = true;
            } else {
                dysarthric = true;
            }
        } else if HEALTHY_WORDS.contains(&tok.as_str()) {
            if negated {
                dysarthric = true;
            } else {
                healthy = true;
            }
        }
    }
    match (healthy, dysarthric) {
        (true, false) => Some(DiagnosticLabel::Healthy),
        (false, true) => Some(DiagnosticLabel::Dysarthric),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub confusion: ConfusionMatrix,
    pub unparseable: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassificationMetrics {
    pub fn from_confusion(confusion: ConfusionMatrix, unparseable: usize) -> Self {
        let ConfusionMatrix { tp, fp, fn_, tn } = confusion;
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let f1 = if tp + fp + fn_ == 0 { 1.0 } else { ratio(2 * tp, 2 * tp + fp + fn_) };
        ClassificationMetrics {
            confusion,
            unparseable,
            accuracy: ratio(tp + tn, confusion.total()),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1,
        }
    }
}

/// Scores predictions against gold labels. An unparseable prediction (`None`)
/// is counted as the label opposite to gold.
pub fn classification_metrics(
    predicted: &[Option<DiagnosticLabel>],
    gold: &[DiagnosticLabel],
) -> Result<ClassificationMetrics, EvalError> {
    if predicted.is_empty() {
        return Err(EvalError::InvalidInput("no labels to score".into()));
    }
    if predicted.len() != gold.len() {
        return Err(EvalError::LengthMismatch { predicted: predicted.len(), gold: gold.len() });
    }
    let mut cm = ConfusionMatrix::default();
    let mut unparseable = 0;
    for (p, &g) in predicted.iter().zip(gold) {
        let p = p.unwrap_or_else(|| {
            unparseable += 1;
            match g {
                DiagnosticLabel::Healthy => DiagnosticLabel::Dysarthric,
                DiagnosticLabel::Dysarthric => DiagnosticLabel::Healthy,
            }
        });
        match (p, g) {
            (DiagnosticLabel::Dysarthric, DiagnosticLabel::Dysarthric) => cm.tp += 1,
            (DiagnosticLabel::Dysarthric, DiagnosticLabel::Healthy) => cm.fp += 1,
            (DiagnosticLabel::Healthy, DiagnosticLabel::Dysarthric) => cm.fn_ += 1,
            (DiagnosticLabel::Healthy, DiagnosticLabel::Healthy) => cm.tn += 1,
        }
    }
    Ok(ClassificationMetrics::from_confusion(cm, unparseable))
}

#[cfg(test)]
mod tests {
    use super::*;
    use DiagnosticLabel::{Dysarthric as D, Healthy as H};

    #[test]
    fn label_rules() {
        assert_eq!(parse_label("ASSESSMENT=dysarthric. blah healthy"), Some(D));
        assert_eq!(parse_label("The speaker sounds healthy."), Some(H));
        assert_eq!(parse_label("There is no dysarthria here."), Some(H));
        assert_eq!(parse_label("Clearly slurred, dysarthric speech"), Some(D));
        assert_eq!(parse_label("Not normal at all"), Some(D));
        assert_eq!(parse_label("healthy or dysarthric, hard to say"), None);
        assert_eq!(parse_label("the tongue rises"), None);
        assert_eq!(parse_label("ASSESSMENT=unknown"), None);
    }

    #[test]
    fn confusion_example() {
        let mut pred = Vec::new();
        let mut gold = Vec::new();
        for (p, g, n) in [(D, D, 3), (D, H, 1), (H, D, 2), (H, H, 4)] {
            for _ in 0..n {
                pred.push(Some(p));
                gold.push(g);
            }
        }
        let m = classification_metrics(&pred, &gold).unwrap();
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.f1 - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn extremes_and_unparseable() {
        let gold = [D, H, D];
        let all = classification_metrics(&gold.map(Some), &gold).unwrap();
        assert_eq!((all.accuracy, all.f1), (1.0, 1.0));
        let inv = classification_metrics(&[Some(H), Some(D), Some(H)], &gold).unwrap();
        assert_eq!((inv.accuracy, inv.f1), (0.0, 0.0));
        let none = classification_metrics(&[None, None, None], &gold).unwrap();
        assert_eq!((none.accuracy, none.unparseable), (0.0, 3));
        assert!(classification_metrics(&[], &[]).is_err());
        assert!(classification_metrics(&[None], &gold).is_err());
    }
}
