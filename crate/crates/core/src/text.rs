//! Tokenizers and word/sentence splitting.
//!
//! The toy [`WordTokenizer`] decodes every token as the word followed by one
//! space, so decoded text always ends on a word boundary. [`ByteTokenizer`]
//! maps raw UTF-8 bytes to 256 ids.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::logits::{TokenId, VocabSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenizeError {
    #[error("unknown word {0:?}")]
    UnknownWord(String),
    #[error("token id {id} outside vocabulary of size {size}")]
    UnknownToken { id: TokenId, size: usize },
    #[error("duplicate vocabulary entry {0:?}")]
    DuplicateEntry(String),
    #[error("vocabulary entry {0:?} is empty or contains whitespace")]
    InvalidEntry(String),
    #[error("empty vocabulary")]
    EmptyVocabulary,
}

pub trait Tokenizer {
    fn spec(&self) -> &VocabSpec;
    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizeError>;
    fn decode(&self, tokens: &[TokenId]) -> Result<String, TokenizeError>;
}

impl<T: Tokenizer + ?Sized> Tokenizer for Arc<T> {
    fn spec(&self) -> &VocabSpec {
        (**self).spec()
    }
    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizeError> {
        (**self).encode(text)
    }
    fn decode(&self, tokens: &[TokenId]) -> Result<String, TokenizeError> {
        (**self).decode(tokens)
    }
}

/// 64-bit FNV-1a, used for stable vocabulary ids and seed derivation.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Whitespace word tokenizer over a fixed word list.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTokenizer {
    words: Vec<String>,
    index: BTreeMap<String, TokenId>,
    unknown: Option<TokenId>,
    spec: VocabSpec,
}

impl WordTokenizer {
    pub const UNKNOWN: &'static str = "<unk>";

    /// Builds a tokenizer from an ordered word list. If `<unk>` is present,
    /// out-of-vocabulary words encode to it instead of failing.
    pub fn new<I, S>(words: I) -> Result<Self, TokenizeError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        if words.is_empty() {
            return Err(TokenizeError::EmptyVocabulary);
        }
        let mut index = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(TokenizeError::InvalidEntry(w.clone()));
            }
            if index.insert(w.clone(), i as TokenId).is_some() {
                return Err(TokenizeError::DuplicateEntry(w.clone()));
            }
        }
        let mut joined = String::new();
        for w in &words {
            joined.push_str(w);
            joined.push('\n');
        }
        let spec = VocabSpec::new(alloc::format!("words-{:016x}", fnv1a64(joined.as_bytes())), words.len());
        let unknown = index.get(Self::UNKNOWN).copied();
        Ok(Self { words, index, unknown, spec })
    }

    /// Sorted vocabulary of every whitespace word in `texts`, plus `extra`.
    pub fn from_texts<'a, I>(texts: I, extra: &[&str]) -> Result<Self, TokenizeError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut set: BTreeSet<String> = extra.iter().map(|s| s.to_string()).collect();
        for t in texts {
            set.extend(t.split_whitespace().map(ToString::to_string));
        }
        Self::new(set)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id_of(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }
}

impl Tokenizer for WordTokenizer {
    fn spec(&self) -> &VocabSpec {
        &self.spec
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizeError> {
        text.split_whitespace()
            .map(|w| match (self.index.get(w), self.unknown) {
                (Some(id), _) => Ok(*id),
                (None, Some(unk)) => Ok(unk),
                (None, None) => Err(TokenizeError::UnknownWord(w.to_string())),
            })
            .collect()
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, TokenizeError> {
        let mut out = String::new();
        for &t in tokens {
            let w = self.word(t).ok_or(TokenizeError::UnknownToken { id: t, size: self.words.len() })?;
            out.push_str(w);
            out.push(' ');
        }
        Ok(out)
    }
}

/// Raw byte tokenizer (256 ids). Decoding is lossy for invalid UTF-8.
#[derive(Debug, Clone, PartialEq)]
pub struct ByteTokenizer {
    spec: VocabSpec,
}

impl Default for ByteTokenizer {
    fn default() -> Self {
        Self { spec: VocabSpec::new("bytes-256", 256) }
    }
}

impl Tokenizer for ByteTokenizer {
    fn spec(&self) -> &VocabSpec {
        &self.spec
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizeError> {
        Ok(text.bytes().map(TokenId::from).collect())
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, TokenizeError> {
        let bytes = tokens
            .iter()
            .map(|&t| u8::try_from(t).map_err(|_| TokenizeError::UnknownToken { id: t, size: 256 }))
            .collect::<Result<Vec<u8>, _>>()?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

/// Lowercases and strips leading/trailing non-alphanumeric characters.
/// Returns `None` when nothing is left (pure punctuation).
pub fn normalize_word(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_lowercase())
    }
}

/// Splits text into words and sentences for corpus statistics and lexicon
/// matching.
pub trait TextSplitter {
    /// Normalized word tokens.
    fn words(&self, text: &str) -> Vec<String>;
    /// Sentences; each non-empty.
    fn sentences<'a>(&self, text: &'a str) -> Vec<&'a str>;
}

/// Unicode-whitespace words, sentences terminated by runs of `.`, `!` or `?`.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceSplitter;

impl TextSplitter for WhitespaceSplitter {
    fn words(&self, text: &str) -> Vec<String> {
        text.split_whitespace().filter_map(normalize_word).collect()
    }

    fn sentences<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut out = Vec::new();
        let mut start = 0;
        let mut chars = text.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            if is_terminator(c) {
                let mut end = i + c.len_utf8();
                while let Some(&(j, d)) = chars.peek() {
                    if is_terminator(d) {
                        end = j + d.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                push_sentence(&mut out, &text[start..end]);
                start = end;
            }
        }
        push_sentence(&mut out, &text[start..]);
        out
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn push_sentence<'a>(out: &mut Vec<&'a str>, piece: &'a str) {
    let piece = piece.trim();
    if piece.chars().any(char::is_alphanumeric) {
        out.push(piece);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn word_tokenizer_round_trip() {
        let tok = WordTokenizer::new(["a", "b", "<stop>"]).unwrap();
        let ids = tok.encode("a b  <stop>").unwrap();
        assert_eq!(ids, vec![0, 1, 2]);
        assert_eq!(tok.decode(&ids).unwrap(), "a b <stop> ");
        assert_eq!(tok.encode(&tok.decode(&ids).unwrap()).unwrap(), ids);
        assert_eq!(tok.encode("c"), Err(TokenizeError::UnknownWord("c".into())));
        assert_eq!(tok.decode(&[3]), Err(TokenizeError::UnknownToken { id: 3, size: 3 }));
    }

    #[test]
    fn unknown_word_fallback() {
        let tok = WordTokenizer::new(["<unk>", "a"]).unwrap();
        assert_eq!(tok.encode("a zzz").unwrap(), vec![1, 0]);
    }

    #[test]
    fn vocab_id_depends_on_words_and_order() {
        let a = WordTokenizer::new(["a", "b"]).unwrap();
        let b = WordTokenizer::new(["b", "a"]).unwrap();
        let c = WordTokenizer::new(["a", "b"]).unwrap();
        assert_ne!(a.spec(), b.spec());
        assert_eq!(a.spec(), c.spec());
        assert!(WordTokenizer::new(["a", "a"]).is_err());
        assert!(WordTokenizer::new(["a b"]).is_err());
    }

    #[test]
    fn byte_tokenizer() {
        let tok = ByteTokenizer::default();
        let ids = tok.encode("hé").unwrap();
        assert_eq!(ids.len(), 3);
        assert_eq!(tok.decode(&ids).unwrap(), "hé");
        assert!(tok.decode(&[300]).is_err());
    }

    #[test]
    fn splitter() {
        let s = WhitespaceSplitter;
        assert_eq!(s.words("Hi. Bye."), vec!["hi", "bye"]);
        assert_eq!(s.sentences("Hi. Bye."), vec!["Hi.", "Bye."]);
        assert_eq!(s.sentences("Wait... what?! ok"), vec!["Wait...", "what?!", "ok"]);
        assert_eq!(s.words("Thanks, -- friend!"), vec!["thanks", "friend"]);
        assert!(s.sentences("  ").is_empty());
    }
}
