//! Question similarity and the diversity score built on it.

use std::collections::HashMap;

/// Similarity in `[0, 1]`; 1 for identical questions.
pub trait Similarity: Send + Sync {
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// Cosine similarity of character-trigram term-frequency vectors.
///
/// Text is lowercased and whitespace runs collapse to one space before
/// trigrams are taken. Strings shorter than three characters count as a
/// single gram.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramCosine;

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn trigram_counts(text: &str) -> HashMap<String, u64> {
    let chars: Vec<char> = text.chars().collect();
    let mut counts = HashMap::new();
    if chars.is_empty() {
        return counts;
    }
    if chars.len() < 3 {
        counts.insert(text.to_string(), 1);
        return counts;
    }
    for w in chars.windows(3) {
        *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
    }
    counts
}

impl Similarity for TrigramCosine {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        let (a, b) = (normalize(a), normalize(b));
        if a == b {
            return 1.0;
        }
        let (ca, cb) = (trigram_counts(&a), trigram_counts(&b));
        let dot: u64 = ca.iter().map(|(g, n)| n * cb.get(g).copied().unwrap_or(0)).sum();
        if dot == 0 {
            return 0.0;
        }
        let na: u64 = ca.values().map(|n| n * n).sum();
        let nb: u64 = cb.values().map(|n| n * n).sum();
        (dot as f64 / ((na as f64) * (nb as f64)).sqrt()).clamp(0.0, 1.0)
    }
}

/// `1 - max_i sim(question, history_i)`; 1 for an empty history.
pub fn diversity_score<S: AsRef<str>>(question: &str, history: &[S], sim: &dyn Similarity) -> f64 {
    let max = history.iter().map(|h| sim.similarity(question, h.as_ref())).fold(0.0, f64::max);
    (1.0 - max).clamp(0.0, 1.0)
}
