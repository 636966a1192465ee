//! Sentence-level BLEU, ROUGE-L and exact-match METEOR over shared
//! tokenization.

use std::collections::HashMap;

use super::EvalError;

/// Lowercases, splits on Unicode whitespace and strips non-alphanumeric
/// characters from both ends of every token; tokens with nothing left
/// disappear.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Reference length closest to `c`, shorter on ties.
fn closest_ref_len<S: AsRef<str>>(c: usize, references: &[Vec<S>]) -> usize {
    references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .expect("references non-empty")
}

/// Clipped `(matches, total)` for order `n`.
pub fn modified_precision<S: AsRef<str>, R: AsRef<str>>(candidate: &[S], references: &[Vec<R>], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
    for r in references {
        for (g, c) in ngram_counts(r, n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let matches = cand.iter().map(|(g, &c)| c.min(*max_ref.get(g).unwrap_or(&0))).sum();
    let total = candidate.len().saturating_sub(n - 1);
    (matches, total)
}

/// BLEU with uniform weights over orders `1..=n`. Orders above one with no
/// clipped matches get add-one smoothing on numerator and denominator.
pub fn bleu_n<S: AsRef<str>, R: AsRef<str>>(candidate: &[S], references: &[Vec<R>], n: usize) -> Result<f64, EvalError> {
    if references.is_empty() {
        return Err(EvalError::NoReferences);
    }
    if n == 0 {
        return Err(EvalError::InvalidInput("BLEU order must be >= 1".into()));
    }
    if candidate.is_empty() {
        return Err(EvalError::InvalidInput("empty candidate".into()));
    }
    let mut log_sum = 0.0;
    for order in 1..=n {
        let (m, t) = modified_precision(candidate, references, order);
        let p = if m == 0 && order > 1 {
            1.0 / (t as f64 + 1.0)
        } else if t == 0 {
            0.0
        } else {
            m as f64 / t as f64
        };
        if p == 0.0 {
            return Ok(0.0);
        }
        log_sum += p.ln();
    }
    let c = candidate.len();
    let r = closest_ref_len(c, references);
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    Ok(bp * (log_sum / n as f64).exp())
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: AsRef<str>, R: AsRef<str>>(a: &[S], b: &[R]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub const ROUGE_BETA: f64 = 1.2;

/// LCS F-measure with recall weighted by `beta^2`; best over references.
pub fn rouge_l<S: AsRef<str>, R: AsRef<str>>(candidate: &[S], references: &[Vec<R>]) -> Result<f64, EvalError> {
    if references.is_empty() {
        return Err(EvalError::NoReferences);
    }
    let beta2 = ROUGE_BETA * ROUGE_BETA;
    let best = references
        .iter()
        .map(|r| {
            let l = lcs_len(candidate, r);
            if l == 0 {
                return 0.0;
            }
            let p = l as f64 / candidate.len() as f64;
            let rec = l as f64 / r.len() as f64;
            (1.0 + beta2) * p * rec / (rec + beta2 * p)
        })
        .fold(0.0, f64::max);
    Ok(best)
}

/// Exact-match alignment summary used by METEOR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub matches: usize,
    pub chunks: usize,
}

/// Search nodes allowed before the chunk minimization settles for the best
/// alignment found so far.
const ALIGN_BUDGET: usize = 200_000;

struct AlignSearch<'a> {
    cand: Vec<&'a str>,
    /// Reference positions per token.
    positions: HashMap<&'a str, Vec<usize>>,
    /// Matches still required per token.
    needed: HashMap<&'a str, usize>,
    /// Candidate occurrences left (including the current one) per token.
    remaining: HashMap<&'a str, usize>,
    used: Vec<bool>,
    best: usize,
    nodes: usize,
}

impl AlignSearch<'_> {
    /// `prev` is the reference position aligned to candidate `i - 1`.
    fn dfs(&mut self, i: usize, prev: Option<usize>, chunks: usize) {
        if chunks >= self.best {
            return;
        }
        if i == self.cand.len() {
            self.best = chunks;
            return;
        }
        self.nodes += 1;
        if self.nodes > ALIGN_BUDGET && self.best != usize::MAX {
            return;
        }
        let tok = self.cand[i];
        let need = self.needed.get(tok).copied().unwrap_or(0);
        let left = self.remaining[tok];
        *self.remaining.get_mut(tok).expect("counted") -= 1;
        if need > 0 {
            // Prefer continuing the current chunk, then other positions in order.
            let mut options: Vec<usize> =
                self.positions[tok].iter().copied().filter(|&p| !self.used[p]).collect();
            if let Some(pp) = prev {
                if let Some(k) = options.iter().position(|&p| p == pp + 1) {
                    options.swap(0, k);
                }
            }
            *self.needed.get_mut(tok).expect("needed") -= 1;
            for p in options {
                let extra = usize::from(prev.is_none_or(|pp| pp + 1 != p));
                self.used[p] = true;
                self.dfs(i + 1, Some(p), chunks + extra);
                self.used[p] = false;
            }
            *self.needed.get_mut(tok).expect("needed") += 1;
        }
        if left > need {
            self.dfs(i + 1, None, chunks);
        }
        *self.remaining.get_mut(tok).expect("counted") += 1;
    }
}

/// Maximum number of exact unigram matches, arranged into the fewest chunks.
pub fn align_exact<S: AsRef<str>, R: AsRef<str>>(candidate: &[S], reference: &[R]) -> Alignment {
    let cand: Vec<&str> = candidate.iter().map(AsRef::as_ref).collect();
    let mut positions: HashMap<&str, Vec<usize>> = HashMap::new();
    for (j, r) in reference.iter().enumerate() {
        positions.entry(r.as_ref()).or_default().push(j);
    }
    let mut remaining: HashMap<&str, usize> = HashMap::new();
    for &c in &cand {
        *remaining.entry(c).or_insert(0) += 1;
    }
    let needed: HashMap<&str, usize> = remaining
        .iter()
        .filter_map(|(t, &c)| positions.get(t).map(|p| (*t, c.min(p.len()))))
        .collect();
    let matches = needed.values().sum();
    if matches == 0 {
        return Alignment { matches: 0, chunks: 0 };
    }
    let mut search =
        AlignSearch { cand, positions, needed, remaining, used: vec![false; reference.len()], best: usize::MAX, nodes: 0 };
    search.dfs(0, None, 0);
    Alignment { matches, chunks: search.best }
}

/// METEOR restricted to exact matches: harmonic mean weighted 9:1 towards
/// recall, times a fragmentation penalty `0.5 * (chunks / matches)^3`.
pub fn meteor_exact<S: AsRef<str>, R: AsRef<str>>(candidate: &[S], references: &[Vec<R>]) -> Result<f64, EvalError> {
    if references.is_empty() {
        return Err(EvalError::NoReferences);
    }
    let best = references
        .iter()
        .map(|r| {
            let a = align_exact(candidate, r);
            if a.matches == 0 {
                return 0.0;
            }
            let p = a.matches as f64 / candidate.len() as f64;
            let rec = a.matches as f64 / r.len() as f64;
            let f_mean = 10.0 * p * rec / (rec + 9.0 * p);
            let penalty = 0.5 * (a.chunks as f64 / a.matches as f64).powi(3);
            f_mean * (1.0 - penalty)
        })
        .fold(0.0, f64::max);
    Ok(best)
}
