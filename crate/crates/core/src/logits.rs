//! Logit composition, softmax and token sampling.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Index of a token inside a [`VocabSpec`].
pub type TokenId = u32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LogitError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("gamma must be non-negative, got {0}")]
    NegativeGamma(f64),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("empty logit vector")]
    Empty,
}

/// Identity of a vocabulary. Two logit sources compose only when both the id
/// and the size agree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VocabSpec {
    pub vocab_id: String,
    pub size: usize,
}

impl VocabSpec {
    pub fn new(vocab_id: impl Into<String>, size: usize) -> Self {
        Self { vocab_id: vocab_id.into(), size }
    }

    pub fn is_composable_with(&self, other: &VocabSpec) -> bool {
        self.vocab_id == other.vocab_id && self.size == other.size
    }
}

impl fmt::Display for VocabSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.vocab_id, self.size)
    }
}

/// Finite per-token scores over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    /// Wraps `values`, rejecting empty vectors and non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self, LogitError> {
        if values.is_empty() {
            return Err(LogitError::Empty);
        }
        check_finite(&values)?;
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> TokenId {
        argmax(&self.0) as TokenId
    }
}

impl TryFrom<Vec<f64>> for LogitVector {
    type Error = LogitError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

/// A probability distribution over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingMode {
    Greedy,
    Temperature { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub mode: SamplingMode,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn greedy() -> Self {
        Self { mode: SamplingMode::Greedy, seed: 0 }
    }

    pub fn temperature(t: f64, seed: u64) -> Self {
        Self { mode: SamplingMode::Temperature { t }, seed }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), LogitError> {
        match self.mode {
            SamplingMode::Greedy => Ok(()),
            SamplingMode::Temperature { t } if t > 0.0 && t.is_finite() => Ok(()),
            SamplingMode::Temperature { t } => Err(LogitError::NonPositiveTemperature(t)),
        }
    }
}

fn check_finite(values: &[f64]) -> Result<(), LogitError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(LogitError::NonFinite { index }),
        None => Ok(()),
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `base + gamma * expert`, entrywise.
pub fn combine_logits(base: &LogitVector, expert: &LogitVector, gamma: f64) -> Result<LogitVector, LogitError> {
    combine_slices(base.values(), expert.values(), gamma).map(LogitVector)
}

pub(crate) fn combine_slices(base: &[f64], expert: &[f64], gamma: f64) -> Result<Vec<f64>, LogitError> {
    if base.len() != expert.len() {
        return Err(LogitError::LengthMismatch { left: base.len(), right: expert.len() });
    }
    if !gamma.is_finite() {
        return Err(LogitError::NonFinite { index: 0 });
    }
    if gamma < 0.0 {
        return Err(LogitError::NegativeGamma(gamma));
    }
    check_finite(base)?;
    check_finite(expert)?;
    let out: Vec<f64> = base.iter().zip(expert).map(|(b, e)| b + gamma * e).collect();
    check_finite(&out)?;
    Ok(out)
}

/// Temperature softmax with max-subtraction.
pub fn softmax(logits: &LogitVector, temperature: f64) -> Result<ProbVector, LogitError> {
    softmax_slice(logits.values(), temperature).map(ProbVector)
}

pub(crate) fn softmax_slice(logits: &[f64], temperature: f64) -> Result<Vec<f64>, LogitError> {
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(LogitError::NonPositiveTemperature(temperature));
    }
    if logits.is_empty() {
        return Err(LogitError::Empty);
    }
    check_finite(logits)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|v| libm::exp((v - max) / temperature)).collect();
    // the max entry contributes exp(0) = 1, so the sum is >= 1
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    Ok(out)
}

/// Stateful token sampler. One instance drives one generation session; the
/// random stream is fully determined by the configured seed.
#[derive(Debug, Clone)]
pub struct TokenSampler {
    config: SamplerConfig,
    rng: ChaCha8Rng,
}

impl TokenSampler {
    pub fn new(config: SamplerConfig) -> Result<Self, LogitError> {
        config.validate()?;
        Ok(Self { config, rng: ChaCha8Rng::seed_from_u64(config.seed) })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn sample(&mut self, logits: &[f64]) -> Result<TokenId, LogitError> {
        if logits.is_empty() {
            return Err(LogitError::Empty);
        }
        check_finite(logits)?;
        match self.config.mode {
            SamplingMode::Greedy => Ok(argmax(logits) as TokenId),
            SamplingMode::Temperature { t } => {
                let probs = softmax_slice(logits, t)?;
                let u: f64 = self.rng.random();
                Ok(inverse_cdf(&probs, u) as TokenId)
            }
        }
    }
}

fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the accumulated mass
    last_positive
}

/// Samples one token. Greedy returns the lowest-index argmax; temperature mode
/// draws the first value of the seeded stream, so repeated calls agree.
pub fn sample_token(logits: &LogitVector, sampler: &SamplerConfig) -> Result<TokenId, LogitError> {
    TokenSampler::new(*sampler)?.sample(logits.values())
}
