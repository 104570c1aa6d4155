//! Deterministic toy logit sources.
//!
//! [`NgramModel`] scores the next token as `ln(count + alpha)` using the
//! longest context suffix seen in training, backing off to the unigram row.
//! [`FixedLogitSource`] returns the same logits for every context.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::logits::{LogitVector, TokenId, VocabSpec};
use crate::steering::{LogitSource, SourceError, SourceErrorKind};
use crate::text::{TokenizeError, Tokenizer, WordTokenizer};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NgramError {
    #[error("token id {id} outside vocabulary of size {size}")]
    UnknownToken { id: TokenId, size: usize },
    #[error("smoothing alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("order must be at least 1")]
    InvalidOrder,
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
}

impl From<NgramError> for SourceError {
    fn from(e: NgramError) -> Self {
        let kind = match e {
            NgramError::UnknownToken { .. } => SourceErrorKind::UnknownToken,
            _ => SourceErrorKind::Other,
        };
        SourceError::new(kind, alloc::format!("{e}"))
    }
}

/// Counting language model over a shared [`WordTokenizer`] vocabulary.
///
/// `order` is the longest context (in tokens) the model conditions on, so
/// order 1 is a bigram model. The empty context holds unigram counts.
#[derive(Debug, Clone)]
pub struct NgramModel {
    model_id: String,
    tokenizer: Arc<WordTokenizer>,
    order: usize,
    alpha: f64,
    counts: BTreeMap<Vec<TokenId>, Vec<u64>>,
}

impl NgramModel {
    pub fn new(
        model_id: impl Into<String>,
        tokenizer: Arc<WordTokenizer>,
        order: usize,
        alpha: f64,
    ) -> Result<Self, NgramError> {
        if order == 0 {
            return Err(NgramError::InvalidOrder);
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(NgramError::InvalidAlpha(alpha));
        }
        Ok(Self { model_id: model_id.into(), tokenizer, order, alpha, counts: BTreeMap::new() })
    }

    /// Trains on every non-empty line of `corpus`; each line is an
    /// independent token sequence.
    pub fn train(
        model_id: impl Into<String>,
        tokenizer: Arc<WordTokenizer>,
        corpus: &str,
        order: usize,
        alpha: f64,
    ) -> Result<Self, NgramError> {
        let mut model = Self::new(model_id, tokenizer, order, alpha)?;
        for line in corpus.lines().filter(|l| !l.trim().is_empty()) {
            let ids = model.tokenizer.encode(line)?;
            model.observe(&ids)?;
        }
        Ok(model)
    }

    /// Adds the counts of one token sequence.
    pub fn observe(&mut self, sequence: &[TokenId]) -> Result<(), NgramError> {
        self.check_tokens(sequence)?;
        let size = self.vocab_size();
        for (i, &next) in sequence.iter().enumerate() {
            for k in 0..=self.order.min(i) {
                let row = self.counts.entry(sequence[i - k..i].to_vec()).or_insert_with(|| vec![0; size]);
                row[next as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tokenizer(&self) -> &Arc<WordTokenizer> {
        &self.tokenizer
    }

    fn vocab_size(&self) -> usize {
        self.tokenizer.spec().size
    }

    fn check_tokens(&self, tokens: &[TokenId]) -> Result<(), NgramError> {
        let size = self.vocab_size();
        match tokens.iter().find(|&&t| t as usize >= size) {
            Some(&id) => Err(NgramError::UnknownToken { id, size }),
            None => Ok(()),
        }
    }

    /// Raw counts of the row used for `context`, after backoff.
    pub fn row(&self, context: &[TokenId]) -> Option<&[u64]> {
        let longest = self.order.min(context.len());
        (0..=longest).rev().find_map(|k| self.counts.get(&context[context.len() - k..]).map(Vec::as_slice))
    }

    pub fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector, NgramError> {
        self.check_tokens(context)?;
        let size = self.vocab_size();
        let logits = match self.row(context) {
            Some(row) => row.iter().map(|&c| libm::log(c as f64 + self.alpha)).collect(),
            None => vec![libm::log(self.alpha); size],
        };
        Ok(LogitVector::new(logits).expect("log of a positive count is finite"))
    }
}

impl LogitSource for NgramModel {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn vocab(&self) -> &VocabSpec {
        self.tokenizer.spec()
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector, SourceError> {
        NgramModel::next_logits(self, context).map_err(Into::into)
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, SourceError> {
        Ok(self.tokenizer.encode(text)?)
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, SourceError> {
        Ok(self.tokenizer.decode(tokens)?)
    }
}

/// Context-independent logits.
#[derive(Debug, Clone)]
pub struct FixedLogitSource {
    model_id: String,
    tokenizer: Arc<WordTokenizer>,
    logits: LogitVector,
}

impl FixedLogitSource {
    pub fn new(model_id: impl Into<String>, tokenizer: Arc<WordTokenizer>, logits: Vec<f64>) -> Result<Self, SourceError> {
        let size = tokenizer.spec().size;
        if logits.len() != size {
            return Err(SourceError::new(
                SourceErrorKind::LengthMismatch,
                alloc::format!("expected {size} logits, got {}", logits.len()),
            ));
        }
        let logits = LogitVector::new(logits).map_err(|e| SourceError::new(SourceErrorKind::Other, alloc::format!("{e}")))?;
        Ok(Self { model_id: model_id.into(), tokenizer, logits })
    }
}

impl LogitSource for FixedLogitSource {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn vocab(&self) -> &VocabSpec {
        self.tokenizer.spec()
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector, SourceError> {
        let size = self.tokenizer.spec().size;
        if let Some(&id) = context.iter().find(|&&t| t as usize >= size) {
            return Err(NgramError::UnknownToken { id, size }.into());
        }
        Ok(self.logits.clone())
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, SourceError> {
        Ok(self.tokenizer.encode(text)?)
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, SourceError> {
        Ok(self.tokenizer.decode(tokens)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Arc<WordTokenizer> {
        Arc::new(WordTokenizer::new(["a", "b"]).unwrap())
    }

    #[test]
    fn hand_built_count_table() {
        // corpus "a a b": bigram rows a->{a:1, b:1}; unigram {a:2, b:1}
        let m = NgramModel::train("t", ab(), "a a b", 1, 1.0).unwrap();
        let after_a = m.next_logits(&[0]).unwrap();
        assert_eq!(after_a.values(), &[libm::log(2.0), libm::log(2.0)]);
        // "b" never appears as a context: back off to unigram counts
        let after_b = m.next_logits(&[1]).unwrap();
        assert_eq!(after_b.values(), &[libm::log(3.0), libm::log(2.0)]);
        let empty = m.next_logits(&[]).unwrap();
        assert_eq!(empty.values(), after_b.values());
    }

    #[test]
    fn longest_suffix_wins() {
        let tok = Arc::new(WordTokenizer::new(["a", "b", "c"]).unwrap());
        let m = NgramModel::train("t", tok, "a b c\nb a", 2, 0.5).unwrap();
        // context [a, b] seen once followed by c
        let l = m.next_logits(&[0, 1]).unwrap();
        assert_eq!(l.argmax(), 2);
        // context [c, b] unseen at length 2, "b" row: {c:1, a:1}
        assert_eq!(m.row(&[2, 1]).unwrap(), &[1, 0, 1]);
    }

    #[test]
    fn empty_table_is_uniform() {
        let m = NgramModel::new("t", ab(), 2, 1.0).unwrap();
        assert_eq!(m.next_logits(&[0, 1]).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        let m = NgramModel::new("t", ab(), 1, 1.0).unwrap();
        assert_eq!(m.next_logits(&[5]), Err(NgramError::UnknownToken { id: 5, size: 2 }));
        assert_eq!(NgramModel::new("t", ab(), 1, 0.0).unwrap_err(), NgramError::InvalidAlpha(0.0));
        assert_eq!(NgramModel::new("t", ab(), 0, 1.0).unwrap_err(), NgramError::InvalidOrder);
        assert!(NgramModel::train("t", ab(), "a z", 1, 1.0).is_err());
    }

    #[test]
    fn frequency_orders_logits() {
        let tok = Arc::new(WordTokenizer::new(["a", "b", "c"]).unwrap());
        let m = NgramModel::train("t", tok, "a b\na b\na c", 1, 0.1).unwrap();
        let l = m.next_logits(&[0]).unwrap();
        assert!(l.values()[1] > l.values()[2]);
        assert!(l.values()[2] > l.values()[0]);
    }
}
