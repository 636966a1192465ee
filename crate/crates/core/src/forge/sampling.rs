//! Temperature-controlled template sampling and diversity-gated acceptance.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{diversity_score, ForgeError, KnowledgeRecord, QuestionTemplatePool, Similarity, Topic};

pub const MIN_TEMPERATURE: f64 = 0.1;
pub const MAX_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_THRESHOLD: f64 = 0.3;
pub const DEFAULT_MAX_RETRIES: usize = 8;

pub fn check_temperature(tau: f64) -> Result<(), ForgeError> {
    if (MIN_TEMPERATURE..=MAX_TEMPERATURE).contains(&tau) {
        Ok(())
    } else {
        Err(ForgeError::InvalidTemperature(tau))
    }
}

/// `softmax(weights / tau)`, computed with the maximum subtracted.
pub fn template_probabilities(weights: &[f64], tau: f64) -> Vec<f64> {
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = weights.iter().map(|w| ((w - max) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledQuestion {
    pub template_index: usize,
    pub question: String,
}

/// Draws one template for `topic` and fills it from `record`.
pub fn sample_question_with<R: Rng + ?Sized>(
    topic: Topic,
    pool: &QuestionTemplatePool,
    record: &KnowledgeRecord,
    tau: f64,
    rng: &mut R,
) -> Result<SampledQuestion, ForgeError> {
    check_temperature(tau)?;
    let templates = pool.templates(topic)?;
    let weights: Vec<f64> = templates.iter().map(|t| t.weight).collect();
    let dist = WeightedIndex::new(template_probabilities(&weights, tau))
        .map_err(|e| ForgeError::InvalidConfig(format!("template weights for {topic}: {e}")))?;
    let template_index = dist.sample(rng);
    let question = templates[template_index].fill(record)?;
    Ok(SampledQuestion { template_index, question })
}

/// Seeded convenience wrapper around [`sample_question_with`].
pub fn sample_question(
    topic: Topic,
    pool: &QuestionTemplatePool,
    record: &KnowledgeRecord,
    tau: f64,
    seed: u64,
) -> Result<SampledQuestion, ForgeError> {
    sample_question_with(topic, pool, record, tau, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceParams {
    pub threshold: f64,
    pub max_retries: usize,
    pub temperature: f64,
}

impl Default for AcceptanceParams {
    fn default() -> Self {
        AcceptanceParams { threshold: DEFAULT_THRESHOLD, max_retries: DEFAULT_MAX_RETRIES, temperature: MAX_TEMPERATURE }
    }
}

impl AcceptanceParams {
    pub fn validate(&self) -> Result<(), ForgeError> {
        check_temperature(self.temperature)?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ForgeError::InvalidConfig(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.max_retries == 0 {
            return Err(ForgeError::InvalidConfig("max_retries must be >= 1".into()));
        }
        Ok(())
    }
}

/// One scored candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub template_index: usize,
    pub question: String,
    pub score: f64,
    pub reconstructed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedQuestion {
    pub question: String,
    pub template_index: usize,
    pub diversity_score: f64,
    pub reconstructed: bool,
    pub trace: Vec<Attempt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionReport {
    pub topic: Topic,
    pub threshold: f64,
    pub attempts: usize,
    pub best_score: f64,
    pub trace: Vec<Attempt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AcceptanceOutcome {
    Accepted(AcceptedQuestion),
    Exhausted(ExhaustionReport),
}

/// Appends the record's phonetic content to a question so it refers to this
/// specific sample.
pub fn reconstruct_question(question: &str, record: &KnowledgeRecord) -> String {
    format!("{} (phonetic content {})", question.trim_end(), record.phonetic_text)
}

/// Samples until a question scores at least `threshold` against `history`.
/// After `max_retries` failed samples the best one is reconstructed and
/// scored once more; if that also fails an exhaustion report is returned.
pub fn accept_or_resample_with<R: Rng + ?Sized, S: AsRef<str>>(
    topic: Topic,
    pool: &QuestionTemplatePool,
    record: &KnowledgeRecord,
    history: &[S],
    params: &AcceptanceParams,
    sim: &dyn Similarity,
    rng: &mut R,
) -> Result<AcceptanceOutcome, ForgeError> {
    params.validate()?;
    let mut trace: Vec<Attempt> = Vec::with_capacity(params.max_retries + 1);
    for _ in 0..params.max_retries {
        let s = sample_question_with(topic, pool, record, params.temperature, rng)?;
        let score = diversity_score(&s.question, history, sim);
        trace.push(Attempt { template_index: s.template_index, question: s.question, score, reconstructed: false });
        if score >= params.threshold {
            return Ok(accepted(trace));
        }
    }
    let best = trace
        .iter()
        .enumerate()
        .fold(0, |best, (i, a)| if a.score > trace[best].score { i } else { best });
    let question = reconstruct_question(&trace[best].question, record);
    let score = diversity_score(&question, history, sim);
    trace.push(Attempt { template_index: trace[best].template_index, question, score, reconstructed: true });
    if score >= params.threshold {
        return Ok(accepted(trace));
    }
    let best_score = trace.iter().map(|a| a.score).fold(f64::NEG_INFINITY, f64::max);
    Ok(AcceptanceOutcome::Exhausted(ExhaustionReport {
        topic,
        threshold: params.threshold,
        attempts: trace.len(),
        best_score,
        trace,
    }))
}

fn accepted(trace: Vec<Attempt>) -> AcceptanceOutcome {
    let last = trace.last().expect("trace is non-empty");
    AcceptanceOutcome::Accepted(AcceptedQuestion {
        question: last.question.clone(),
        template_index: last.template_index,
        diversity_score: last.score,
        reconstructed: last.reconstructed,
        trace,
    })
}

/// Seeded convenience wrapper around [`accept_or_resample_with`].
pub fn accept_or_resample<S: AsRef<str>>(
    topic: Topic,
    pool: &QuestionTemplatePool,
    record: &KnowledgeRecord,
    history: &[S],
    params: &AcceptanceParams,
    sim: &dyn Similarity,
    seed: u64,
) -> Result<AcceptanceOutcome, ForgeError> {
    accept_or_resample_with(topic, pool, record, history, params, sim, &mut ChaCha8Rng::seed_from_u64(seed))
}
