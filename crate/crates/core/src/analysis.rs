//! Intra-trait correlations, matrix distance, corpus statistics, lexicon
//! category frequencies, and Welch's t-test.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::personality::Trait;
use crate::special::student_t_two_sided;
use crate::text::TextSplitter;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("column {0} has zero variance")]
    DegenerateColumn(Trait),
    #[error("non-finite entry at row {row}")]
    NonFinite { row: usize },
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("ragged matrix: row {row} has {len} entries, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },
    #[error("group {0} is empty")]
    EmptyGroup(String),
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("per_tokens must be positive")]
    InvalidUnit,
    #[error("sample needs at least 2 values, got {0}")]
    TooFewValues(usize),
    #[error("sample has zero variance")]
    DegenerateSample,
    #[error("lexicon category {0:?} is invalid: {1}")]
    InvalidCategory(String, &'static str),
}

/// Rows are respondents or conditions, columns the five traits in OCEAN
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    rows: Vec<[f64; 5]>,
}

impl ScoreMatrix {
    pub fn new(rows: Vec<[f64; 5]>) -> Result<Self, AnalysisError> {
        if let Some(row) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(AnalysisError::NonFinite { row });
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[[f64; 5]] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[j])
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AnalysisError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(AnalysisError::Ragged { row, len: r.len(), expected: cols });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = alloc::vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: alloc::vec![0.0; rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// 5×5 Pearson correlation matrix in OCEAN order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix(pub [[f64; 5]; 5]);

impl CorrelationMatrix {
    pub fn get(&self, a: Trait, b: Trait) -> f64 {
        self.0[a.index()][b.index()]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix { rows: 5, cols: 5, data: self.0.iter().flatten().copied().collect() }
    }
}

pub fn pearson_matrix(scores: &ScoreMatrix) -> Result<CorrelationMatrix, AnalysisError> {
    let n = scores.rows().len();
    if n < 2 {
        return Err(AnalysisError::TooFewRows { needed: 2, got: n });
    }
    let mut means = [0.0; 5];
    for (j, m) in means.iter_mut().enumerate() {
        *m = scores.column(j).sum::<f64>() / n as f64;
    }
    let centered: Vec<[f64; 5]> =
        scores.rows().iter().map(|r| core::array::from_fn(|j| r[j] - means[j])).collect();
    let mut norms = [0.0; 5];
    for (j, norm) in norms.iter_mut().enumerate() {
        *norm = libm::sqrt(centered.iter().map(|r| r[j] * r[j]).sum::<f64>());
        if *norm == 0.0 {
            return Err(AnalysisError::DegenerateColumn(Trait::ALL[j]));
        }
    }
    let mut out = [[0.0; 5]; 5];
    for i in 0..5 {
        out[i][i] = 1.0;
        for j in (i + 1)..5 {
            let dot: f64 = centered.iter().map(|r| r[i] * r[j]).sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(CorrelationMatrix(out))
}

/// `sqrt(sum (a_ij - b_ij)^2)` over equal-shape matrices.
pub fn frobenius_distance(a: &Matrix, b: &Matrix) -> Result<f64, AnalysisError> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(AnalysisError::ShapeMismatch(a.rows, a.cols, b.rows, b.cols));
    }
    Ok(libm::sqrt(a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum()))
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: libm::sqrt(var) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: String,
    pub texts: usize,
    pub tokens: MeanStd,
    pub sentences: MeanStd,
    pub vocab: MeanStd,
    pub sentence_length: MeanStd,
    pub total_vocab: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub groups: Vec<GroupStats>,
}

/// A named collection of texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextGroup {
    pub name: String,
    pub texts: Vec<String>,
}

/// Per-text token, sentence, vocabulary and mean sentence length statistics
/// per group, plus the group's total vocabulary.
pub fn corpus_statistics(groups: &[TextGroup], splitter: &impl TextSplitter) -> Result<CorpusStats, AnalysisError> {
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        if g.texts.is_empty() {
            return Err(AnalysisError::EmptyGroup(g.name.clone()));
        }
        let mut tokens = Vec::new();
        let mut sentences = Vec::new();
        let mut vocab = Vec::new();
        let mut lengths = Vec::new();
        let mut total: BTreeSet<String> = BTreeSet::new();
        for text in &g.texts {
            let words = splitter.words(text);
            let sents = splitter.sentences(text).len();
            let distinct: BTreeSet<&String> = words.iter().collect();
            tokens.push(words.len() as f64);
            sentences.push(sents as f64);
            vocab.push(distinct.len() as f64);
            lengths.push(if sents == 0 { 0.0 } else { words.len() as f64 / sents as f64 });
            total.extend(words);
        }
        out.push(GroupStats {
            group: g.name.clone(),
            texts: g.texts.len(),
            tokens: MeanStd::of(&tokens),
            sentences: MeanStd::of(&sentences),
            vocab: MeanStd::of(&vocab),
            sentence_length: MeanStd::of(&lengths),
            total_vocab: total.len(),
        });
    }
    Ok(CorpusStats { groups: out })
}

/// A lexicon category: literal words and trailing-`*` prefix patterns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconCategory {
    pub name: String,
    literals: BTreeSet<String>,
    prefixes: Vec<String>,
}

impl LexiconCategory {
    /// Entries must be lowercase; `ador*` is a prefix pattern.
    pub fn new<I, S>(name: impl Into<String>, entries: I) -> Result<Self, AnalysisError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let name = name.into();
        let mut literals = BTreeSet::new();
        let mut prefixes = Vec::new();
        for e in entries {
            let e = e.as_ref().trim();
            if e.is_empty() || e == "*" {
                return Err(AnalysisError::InvalidCategory(name, "empty entry"));
            }
            if e.to_lowercase() != e {
                return Err(AnalysisError::InvalidCategory(name, "entries must be lowercase"));
            }
            match e.strip_suffix('*') {
                Some(p) => prefixes.push(p.into()),
                None => {
                    literals.insert(e.into());
                }
            }
        }
        if literals.is_empty() && prefixes.is_empty() {
            return Err(AnalysisError::InvalidCategory(name, "no entries"));
        }
        Ok(Self { name, literals, prefixes })
    }

    /// `token` must already be lowercased.
    pub fn matches(&self, token: &str) -> bool {
        self.literals.contains(token) || self.prefixes.iter().any(|p| token.starts_with(p.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryFrequency {
    pub category: String,
    pub matches: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryFrequencyReport {
    pub total_tokens: usize,
    pub per_tokens: u64,
    pub categories: Vec<CategoryFrequency>,
}

impl CategoryFrequencyReport {
    pub fn frequency(&self, category: &str) -> Option<f64> {
        self.categories.iter().find(|c| c.category == category).map(|c| c.frequency)
    }
}

/// Matched tokens per `per_tokens` tokens, for each category.
pub fn category_frequencies<S: AsRef<str>>(
    texts: &[S],
    lexicon: &[LexiconCategory],
    per_tokens: u64,
    splitter: &impl TextSplitter,
) -> Result<CategoryFrequencyReport, AnalysisError> {
    if per_tokens == 0 {
        return Err(AnalysisError::InvalidUnit);
    }
    let mut total = 0usize;
    let mut hits = alloc::vec![0usize; lexicon.len()];
    for text in texts {
        for token in splitter.words(text.as_ref()) {
            total += 1;
            for (h, cat) in hits.iter_mut().zip(lexicon) {
                if cat.matches(&token) {
                    *h += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(AnalysisError::EmptyCorpus);
    }
    let categories = lexicon
        .iter()
        .zip(hits)
        .map(|(cat, matches)| CategoryFrequency {
            category: cat.name.clone(),
            matches,
            frequency: matches as f64 / total as f64 * per_tokens as f64,
        })
        .collect();
    Ok(CategoryFrequencyReport { total_tokens: total, per_tokens, categories })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of
/// freedom and a two-sided p-value. Sample variances use `n - 1`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult, AnalysisError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(AnalysisError::TooFewValues(s.len()));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::NonFinite { row: 0 });
        }
    }
    let stats = |s: &[f64]| {
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (n, mean, var)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    if va == 0.0 || vb == 0.0 {
        return Err(AnalysisError::DegenerateSample);
    }
    let sa = va / na;
    let sb = vb / nb;
    let t = (ma - mb) / libm::sqrt(sa + sb);
    let df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(WelchResult { t, df, p: student_t_two_sided(t, df) })
}

/// One-sided exact sign test: P(X >= wins) for X ~ Binomial(trials, 1/2).
pub fn sign_test_p(wins: usize, trials: usize) -> f64 {
    let mut total = 0.0;
    let ln_half_n = trials as f64 * core::f64::consts::LN_2;
    for k in wins..=trials {
        let ln_choose = libm::lgamma(trials as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((trials - k) as f64 + 1.0);
        total += libm::exp(ln_choose - ln_half_n);
    }
    total.min(1.0)
}
