//! Two-phase steered generation.
//!
//! The base source alone produces the continuation until the prefix
//! requirement is met (by default five whitespace-terminated words). From then
//! on every token is sampled from `base + gamma * expert`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::logits::{combine_slices, LogitError, LogitVector, SamplerConfig, TokenId, TokenSampler, VocabSpec};
use crate::text::TokenizeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceErrorKind {
    Transport,
    Protocol,
    LengthMismatch,
    UnknownToken,
    Tokenizer,
    Other,
}

/// Failure reported by a [`LogitSource`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind:?}: {message}")]
pub struct SourceError {
    pub kind: SourceErrorKind,
    pub message: String,
}

impl SourceError {
    pub fn new(kind: SourceErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

impl From<TokenizeError> for SourceError {
    fn from(e: TokenizeError) -> Self {
        let kind = match e {
            TokenizeError::UnknownToken { .. } => SourceErrorKind::UnknownToken,
            _ => SourceErrorKind::Tokenizer,
        };
        SourceError::new(kind, alloc::format!("{e}"))
    }
}

/// A model that scores the next token given a token context.
pub trait LogitSource {
    fn model_id(&self) -> &str;
    fn vocab(&self) -> &VocabSpec;
    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector, SourceError>;
    fn encode(&self, text: &str) -> Result<Vec<TokenId>, SourceError>;
    fn decode(&self, tokens: &[TokenId]) -> Result<String, SourceError>;
}

impl<T: LogitSource + ?Sized> LogitSource for &T {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn vocab(&self) -> &VocabSpec {
        (**self).vocab()
    }
    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector, SourceError> {
        (**self).next_logits(context)
    }
    fn encode(&self, text: &str) -> Result<Vec<TokenId>, SourceError> {
        (**self).encode(text)
    }
    fn decode(&self, tokens: &[TokenId]) -> Result<String, SourceError> {
        (**self).decode(tokens)
    }
}

impl<T: LogitSource + ?Sized> LogitSource for alloc::boxed::Box<T> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn vocab(&self) -> &VocabSpec {
        (**self).vocab()
    }
    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector, SourceError> {
        (**self).next_logits(context)
    }
    fn encode(&self, text: &str) -> Result<Vec<TokenId>, SourceError> {
        (**self).encode(text)
    }
    fn decode(&self, tokens: &[TokenId]) -> Result<String, SourceError> {
        (**self).decode(tokens)
    }
}

/// How the unsteered prefix is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixUnit {
    /// Whitespace-terminated words of the decoded continuation.
    #[default]
    Words,
    /// Raw generated tokens.
    Tokens,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringPolicy {
    pub gamma: f64,
    pub prefix_words: usize,
    #[serde(default)]
    pub prefix_unit: PrefixUnit,
    pub max_new_tokens: usize,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
}

impl Default for SteeringPolicy {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            prefix_words: 5,
            prefix_unit: PrefixUnit::Words,
            max_new_tokens: 64,
            stop_sequences: Vec::new(),
        }
    }
}

impl SteeringPolicy {
    pub fn validate(&self) -> Result<(), SteeringError> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(SteeringError::InvalidPolicy("gamma must be finite and non-negative"));
        }
        if self.max_new_tokens == 0 {
            return Err(SteeringError::InvalidPolicy("max_new_tokens must be at least 1"));
        }
        if self.stop_sequences.iter().any(String::is_empty) {
            return Err(SteeringError::InvalidPolicy("stop sequences must be non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StopSequence,
    MaxTokens,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::StopSequence => "stop_sequence",
            StopReason::MaxTokens => "max_tokens",
        }
    }
}

/// Output of one generation session.
///
/// `tokens` holds every sampled token, including the one that completed a stop
/// sequence. `text` is `decode(tokens)` cut just before the matched stop text,
/// so it equals the full decode when `stop_reason` is `MaxTokens`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub tokens: Vec<TokenId>,
    pub prefix_boundary: Option<usize>,
    pub stop_reason: StopReason,
    pub seed: u64,
    pub gamma_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Prompt,
    Prefix,
    Steered,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Prompt => "prompt",
            Phase::Prefix => "prefix",
            Phase::Steered => "steered",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Base,
    Expert,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Base => "base",
            Role::Expert => "expert",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SteeringError {
    #[error("vocabulary mismatch: base {base} vs expert {expert}")]
    VocabMismatch { base: VocabSpec, expert: VocabSpec },
    #[error("{role} source failed during {phase} phase: {source}")]
    BackendFailure { role: Role, phase: Phase, source: SourceError },
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("invalid policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("sampling failed: {0}")]
    Sampling(#[from] LogitError),
}

/// True once `continuation` holds at least `prefix_words` words each followed
/// by whitespace. A trailing word with nothing after it is not yet complete,
/// so steering never starts mid-word.
pub fn prefix_complete(continuation: &str, prefix_words: usize) -> bool {
    terminated_words(continuation) >= prefix_words
}

fn terminated_words(text: &str) -> usize {
    let mut count = 0;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_whitespace() {
            if in_word {
                count += 1;
            }
            in_word = false;
        } else {
            in_word = true;
        }
    }
    count
}

fn find_stop(text: &str, stops: &[String]) -> Option<usize> {
    stops.iter().filter_map(|s| text.find(s.as_str())).min()
}

/// Steered generation: base-only until the prefix boundary, then
/// `base + gamma * expert`.
pub fn generate_steered<B, E>(
    base: &B,
    expert: &E,
    prompt: &str,
    policy: &SteeringPolicy,
    sampler: &SamplerConfig,
) -> Result<GenerationResult, SteeringError>
where
    B: LogitSource + ?Sized,
    E: LogitSource + ?Sized,
{
    if !base.vocab().is_composable_with(expert.vocab()) {
        return Err(SteeringError::VocabMismatch { base: base.vocab().clone(), expert: expert.vocab().clone() });
    }
    run(base, Some(expert), prompt, policy, sampler)
}

/// The same loop with no expert at all.
pub fn generate_base<B>(
    base: &B,
    prompt: &str,
    policy: &SteeringPolicy,
    sampler: &SamplerConfig,
) -> Result<GenerationResult, SteeringError>
where
    B: LogitSource + ?Sized,
{
    let mut result = run::<B, B>(base, None, prompt, policy, sampler)?;
    result.gamma_used = 0.0;
    Ok(result)
}

fn query<S: LogitSource + ?Sized>(
    source: &S,
    size: usize,
    context: &[TokenId],
    role: Role,
    phase: Phase,
) -> Result<LogitVector, SteeringError> {
    let fail = |source| SteeringError::BackendFailure { role, phase, source };
    let logits = source.next_logits(context).map_err(fail)?;
    if logits.len() != size {
        return Err(fail(SourceError::new(
            SourceErrorKind::LengthMismatch,
            alloc::format!("expected {size} logits, got {}", logits.len()),
        )));
    }
    Ok(logits)
}

fn run<B: LogitSource + ?Sized, E: LogitSource + ?Sized>(
    base: &B,
    expert: Option<&E>,
    prompt: &str,
    policy: &SteeringPolicy,
    sampler: &SamplerConfig,
) -> Result<GenerationResult, SteeringError> {
    policy.validate()?;
    let mut token_sampler = TokenSampler::new(*sampler)?;
    if prompt.trim().is_empty() {
        return Err(SteeringError::EmptyPrompt);
    }
    let backend = |phase| move |source| SteeringError::BackendFailure { role: Role::Base, phase, source };
    let mut context = base.encode(prompt).map_err(backend(Phase::Prompt))?;
    if context.is_empty() {
        return Err(SteeringError::EmptyPrompt);
    }
    let size = base.vocab().size;

    let mut boundary = (policy.prefix_words == 0).then_some(0);
    let mut tokens: Vec<TokenId> = Vec::new();
    let mut text = String::new();
    let mut stop_reason = StopReason::MaxTokens;

    while tokens.len() < policy.max_new_tokens {
        let phase = if boundary.is_some() { Phase::Steered } else { Phase::Prefix };
        let base_logits = query(base, size, &context, Role::Base, phase)?;
        let token = match (boundary, expert) {
            (Some(_), Some(expert)) => {
                let expert_logits = query(expert, size, &context, Role::Expert, phase)?;
                let combined = combine_slices(base_logits.values(), expert_logits.values(), policy.gamma)?;
                token_sampler.sample(&combined)?
            }
            _ => token_sampler.sample(base_logits.values())?,
        };
        tokens.push(token);
        context.push(token);

        text = base.decode(&tokens).map_err(backend(phase))?;
        if let Some(at) = find_stop(&text, &policy.stop_sequences) {
            text.truncate(at);
            stop_reason = StopReason::StopSequence;
            break;
        }
        if boundary.is_none() {
            let done = match policy.prefix_unit {
                PrefixUnit::Words => prefix_complete(&text, policy.prefix_words),
                PrefixUnit::Tokens => tokens.len() >= policy.prefix_words,
            };
            if done {
                boundary = Some(tokens.len());
            }
        }
    }

    Ok(GenerationResult {
        text,
        tokens,
        prefix_boundary: boundary,
        stop_reason,
        seed: sampler.seed,
        gamma_used: policy.gamma,
    })
}
