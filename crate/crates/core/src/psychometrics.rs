//! Questionnaire definitions, rating extraction, keyed scoring and repeated
//! administration under a persona prompt.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{mix_seed, DialogueRecord};
use crate::logits::SamplerConfig;
use crate::personality::{Trait, TraitSpec, TraitValues};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PsychometricError {
    #[error("rating {rating} outside scale [{min}, {max}]")]
    OutOfScale { rating: i64, min: i64, max: i64 },
    #[error("item {0} was not answered")]
    MissingItem(String),
    #[error("item {0} answered more than once")]
    DuplicateResponse(String),
    #[error("response refers to unknown item {0}")]
    UnknownItem(String),
    #[error("no in-scale rating in response {raw_text:?} for item {item_id}")]
    UnparseableResponse { item_id: String, raw_text: String },
    #[error("responder failed on item {item_id}: {message}")]
    ResponderFailure { item_id: String, message: String },
    #[error("invalid questionnaire: {0}")]
    InvalidQuestionnaire(String),
    #[error("runs must be at least 1")]
    NoRuns,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireItem {
    pub item_id: String,
    pub text: String,
    #[serde(rename = "trait")]
    pub trait_name: Trait,
    pub reverse_keyed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scale {
    pub min: i64,
    pub max: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Questionnaire {
    name: String,
    items: Vec<QuestionnaireItem>,
    scale: Scale,
}

impl Questionnaire {
    /// Validates unique item ids, at least one item per trait and
    /// `scale_min < scale_max`.
    pub fn new(name: impl Into<String>, items: Vec<QuestionnaireItem>, scale_min: i64, scale_max: i64) -> Result<Self, PsychometricError> {
        if scale_min >= scale_max {
            return Err(PsychometricError::InvalidQuestionnaire(format!("scale_min {scale_min} >= scale_max {scale_max}")));
        }
        let mut ids = BTreeSet::new();
        for item in &items {
            if !ids.insert(item.item_id.as_str()) {
                return Err(PsychometricError::InvalidQuestionnaire(format!("duplicate item id {}", item.item_id)));
            }
        }
        for t in Trait::ALL {
            if !items.iter().any(|i| i.trait_name == t) {
                return Err(PsychometricError::InvalidQuestionnaire(format!("no items for {t}")));
            }
        }
        Ok(Self { name: name.into(), items, scale: Scale { min: scale_min, max: scale_max } })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn items(&self) -> &[QuestionnaireItem] {
        &self.items
    }

    pub fn scale(&self) -> &Scale {
        &self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemResponse {
    pub item_id: String,
    pub rating: i64,
    #[serde(default)]
    pub raw_text: String,
}

/// Keyed score of one rating: the rating itself, or `(min + max) - rating`
/// for reverse-keyed items.
pub fn score_item(rating: i64, item: &QuestionnaireItem, scale: &Scale) -> Result<f64, PsychometricError> {
    if rating < scale.min || rating > scale.max {
        return Err(PsychometricError::OutOfScale { rating, min: scale.min, max: scale.max });
    }
    let keyed = if item.reverse_keyed { scale.min + scale.max - rating } else { rating };
    Ok(keyed as f64)
}

/// Per-trait means for one completed questionnaire.
pub fn score_responses(responses: &[ItemResponse], q: &Questionnaire) -> Result<TraitValues, PsychometricError> {
    let mut by_id: BTreeMap<&str, &ItemResponse> = BTreeMap::new();
    for r in responses {
        if by_id.insert(r.item_id.as_str(), r).is_some() {
            return Err(PsychometricError::DuplicateResponse(r.item_id.clone()));
        }
    }
    let mut sums = [0.0f64; 5];
    let mut counts = [0usize; 5];
    for item in q.items() {
        let r = by_id.remove(item.item_id.as_str()).ok_or_else(|| PsychometricError::MissingItem(item.item_id.clone()))?;
        sums[item.trait_name.index()] += score_item(r.rating, item, q.scale())?;
        counts[item.trait_name.index()] += 1;
    }
    if let Some((id, _)) = by_id.into_iter().next() {
        return Err(PsychometricError::UnknownItem(id.into()));
    }
    let mut means = [0.0; 5];
    for i in 0..5 {
        means[i] = sums[i] / counts[i] as f64;
    }
    Ok(TraitValues(means))
}

/// Per-run trait scores and their cross-run mean and population std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitScoreReport {
    pub questionnaire: String,
    pub runs: Vec<TraitValues>,
    pub mean: TraitValues,
    pub std: TraitValues,
}

impl TraitScoreReport {
    pub fn from_runs(questionnaire: impl Into<String>, runs: Vec<TraitValues>) -> Self {
        let n = runs.len().max(1) as f64;
        let mut mean = [0.0; 5];
        let mut std = [0.0; 5];
        for i in 0..5 {
            mean[i] = runs.iter().map(|r| r.0[i]).sum::<f64>() / n;
            let var = runs.iter().map(|r| (r.0[i] - mean[i]) * (r.0[i] - mean[i])).sum::<f64>() / n;
            std[i] = libm::sqrt(var);
        }
        Self { questionnaire: questionnaire.into(), runs, mean: TraitValues(mean), std: TraitValues(std) }
    }
}

pub fn score_questionnaire(responses: &[ItemResponse], q: &Questionnaire) -> Result<TraitScoreReport, PsychometricError> {
    let scores = score_responses(responses, q)?;
    Ok(TraitScoreReport::from_runs(q.name(), alloc::vec![scores]))
}

fn digit_runs(raw: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
    let bytes = raw.as_bytes();
    let mut i = 0;
    core::iter::from_fn(move || {
        while i < bytes.len() {
            if bytes[i].is_ascii_digit() {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                return Some((start, i));
            }
            i += 1;
        }
        None
    })
}

fn is_word_char(c: Option<char>) -> bool {
    c.is_some_and(|c| c.is_alphanumeric() || c == '_')
}

/// Word immediately before `at`, skipping spaces and `#`, `:`, `.`.
fn preceding_word(raw: &str, at: usize) -> &str {
    let before = raw[..at].trim_end_matches(|c: char| c.is_whitespace() || matches!(c, '#' | ':' | '.'));
    let start = before.rfind(|c: char| !c.is_alphanumeric()).map_or(0, |i| i + 1);
    &before[start..]
}

/// First standalone integer inside the scale. Numbers glued to letters, parts
/// of decimals, and numbers right after "question" / "item" / "q" are
/// skipped.
pub fn parse_rating(raw: &str, scale: &Scale) -> Option<i64> {
    for (start, end) in digit_runs(raw) {
        let prev = raw[..start].chars().next_back();
        let mut rest = raw[end..].chars();
        let next = rest.next();
        if is_word_char(prev) || is_word_char(next) {
            continue;
        }
        let decimal_tail = matches!(next, Some('.') | Some(',')) && rest.next().is_some_and(|c| c.is_ascii_digit());
        let decimal_head = matches!(prev, Some('.') | Some(','))
            && raw[..start - 1].chars().next_back().is_some_and(|c| c.is_ascii_digit());
        if decimal_tail || decimal_head {
            continue;
        }
        let label = preceding_word(raw, start);
        if ["question", "item", "q", "no"].iter().any(|w| label.eq_ignore_ascii_case(w)) {
            continue;
        }
        let Ok(value) = raw[start..end].parse::<i64>() else { continue };
        if value >= scale.min && value <= scale.max {
            return Some(value);
        }
    }
    None
}

/// Persona prompt families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "snake_case")]
pub enum Persona {
    /// No persona text.
    Neutral,
    /// `You are a person with {level} {trait}.`
    Instruction(TraitSpec),
    /// The instruction format used by the SFT/DPO exports.
    TrainingFormat(TraitSpec),
    /// In-context demonstrations followed by the training instruction.
    Demonstration { spec: TraitSpec, examples: Vec<String> },
}

impl Persona {
    pub fn render(&self) -> String {
        match self {
            Persona::Neutral => String::new(),
            Persona::Instruction(spec) => format!("You are a person with {} {}.", spec.level.name(), spec.trait_name.name()),
            Persona::TrainingFormat(spec) => crate::dataset::training_instruction(*spec),
            Persona::Demonstration { examples, .. } => {
                let mut out = format!(
                    "Here are {} examples of how people like you have responded in different situations. \
                     Pay attention to how they approach communication and problem-solving.\n",
                    examples.len()
                );
                for ex in examples {
                    out.push('\n');
                    out.push_str(ex);
                    out.push('\n');
                }
                out
            }
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Persona::Neutral => "neutral",
            Persona::Instruction(_) => "instruction",
            Persona::TrainingFormat(_) => "training",
            Persona::Demonstration { .. } => "demonstration",
        }
    }
}

/// Deterministically picks up to `n` records matching `spec` and formats them
/// as two-turn demonstrations.
pub fn demonstrations(records: &[DialogueRecord], spec: TraitSpec, n: usize, seed: u64) -> Vec<String> {
    let mut pool: Vec<(u64, &DialogueRecord)> = records
        .iter()
        .filter(|r| r.trait_spec() == spec)
        .map(|r| (mix_seed(seed, crate::text::fnv1a64(r.scenario_id.as_bytes())), r))
        .collect();
    pool.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.scenario_id.cmp(&b.1.scenario_id)));
    pool.into_iter()
        .take(n)
        .map(|(_, r)| format!("Speaker X: {}\nSpeaker Y: {}", r.speaker_x, r.speaker_y))
        .collect()
}

/// Full prompt for one item.
pub fn item_prompt(persona: &Persona, item: &QuestionnaireItem, scale: &Scale) -> String {
    let persona = persona.render();
    let mut out = String::new();
    if !persona.is_empty() {
        out.push_str(&persona);
        out.push_str("\n\n");
    }
    out.push_str(&format!(
        "Rate how well the following statement describes you on a scale from {} (strongly disagree) to {} (strongly agree). \
         Answer with a single number.\n\nStatement: {}",
        scale.min, scale.max, item.text
    ));
    out
}

/// Anything that answers a prompt with text.
pub trait Responder {
    fn respond(&self, prompt: &str, sampler: &SamplerConfig) -> Result<String, String>;
}

impl<F> Responder for F
where
    F: Fn(&str, &SamplerConfig) -> Result<String, String>,
{
    fn respond(&self, prompt: &str, sampler: &SamplerConfig) -> Result<String, String> {
        self(prompt, sampler)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub run: usize,
    pub item_id: String,
    pub attempt: usize,
    pub seed: u64,
    pub prompt: String,
    pub raw_response: String,
    pub parsed_rating: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Administration {
    pub report: TraitScoreReport,
    pub transcript: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdministerOptions {
    pub runs: usize,
    pub retries: usize,
}

impl Default for AdministerOptions {
    fn default() -> Self {
        Self { runs: 5, retries: 2 }
    }
}

/// Default sampler for questionnaire runs: temperature 0.6.
pub fn default_sampler(seed: u64) -> SamplerConfig {
    SamplerConfig::temperature(0.6, seed)
}

/// Seed for one query, a function of the run seed, run, item and attempt.
pub fn query_seed(seed: u64, run: usize, item_index: usize, attempt: usize) -> u64 {
    mix_seed(mix_seed(mix_seed(seed, run as u64), item_index as u64), attempt as u64)
}

/// One questionnaire run: items asked in order, each retried on unparseable
/// answers.
pub fn administer_run(
    responder: &(impl Responder + ?Sized),
    q: &Questionnaire,
    persona: &Persona,
    run: usize,
    sampler: &SamplerConfig,
    retries: usize,
    transcript: &mut Vec<TranscriptEntry>,
) -> Result<TraitValues, PsychometricError> {
    let mut responses = Vec::with_capacity(q.items().len());
    for (index, item) in q.items().iter().enumerate() {
        let prompt = item_prompt(persona, item, q.scale());
        let mut last = String::new();
        let mut rating = None;
        for attempt in 0..=retries {
            let seed = query_seed(sampler.seed, run, index, attempt);
            let raw = responder
                .respond(&prompt, &sampler.with_seed(seed))
                .map_err(|message| PsychometricError::ResponderFailure { item_id: item.item_id.clone(), message })?;
            let parsed = parse_rating(&raw, q.scale());
            transcript.push(TranscriptEntry {
                run,
                item_id: item.item_id.clone(),
                attempt,
                seed,
                prompt: prompt.clone(),
                raw_response: raw.clone(),
                parsed_rating: parsed,
            });
            last = raw;
            if parsed.is_some() {
                rating = parsed;
                break;
            }
        }
        let rating = rating.ok_or_else(|| PsychometricError::UnparseableResponse { item_id: item.item_id.clone(), raw_text: last.clone() })?;
        responses.push(ItemResponse { item_id: item.item_id.clone(), rating, raw_text: last });
    }
    score_responses(&responses, q)
}

/// Repeats the questionnaire `options.runs` times and aggregates.
pub fn administer(
    responder: &(impl Responder + ?Sized),
    q: &Questionnaire,
    persona: &Persona,
    options: AdministerOptions,
    sampler: &SamplerConfig,
) -> Result<Administration, PsychometricError> {
    if options.runs == 0 {
        return Err(PsychometricError::NoRuns);
    }
    let mut transcript = Vec::new();
    let mut runs = Vec::with_capacity(options.runs);
    for run in 0..options.runs {
        runs.push(administer_run(responder, q, persona, run, sampler, options.retries, &mut transcript)?);
    }
    Ok(Administration { report: TraitScoreReport::from_runs(q.name(), runs), transcript })
}
