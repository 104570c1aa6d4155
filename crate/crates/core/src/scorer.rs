//! Five-output linear trait regressor over bag-of-words features, and
//! high/low accuracy evaluation for any trait scorer.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::personality::{check_labels, tertile_thresholds, ContinuousLabels, Level, TertileThresholds, Trait, TraitModelError, TraitSpec, TraitValues};
use crate::text::{normalize_word, TextSplitter, WhitespaceSplitter};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScorerError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("text {0} is empty")]
    EmptyText(usize),
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("l2 lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("invalid label at row {row}: {source}")]
    InvalidLabel { row: usize, source: TraitModelError },
    #[error("evaluation set is empty")]
    EmptyEvaluationSet,
    #[error("model is missing tertile thresholds")]
    MissingThresholds,
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),
    #[error("scorer failed: {0}")]
    Backend(String),
}

/// Lowercased term-frequency featurizer with an optional per-text length
/// normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    vocabulary: BTreeMap<String, usize>,
    pub length_normalize: bool,
}

impl Featurizer {
    pub fn new(tokens: Vec<String>, length_normalize: bool) -> Self {
        let vocabulary = tokens.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
        Self { vocabulary, length_normalize }
    }

    /// Vocabulary of tokens appearing in at least `min_doc_freq` texts.
    pub fn fit<S: AsRef<str>>(texts: &[S], min_doc_freq: usize, length_normalize: bool) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            let mut words = WhitespaceSplitter.words(t.as_ref());
            words.sort();
            words.dedup();
            for w in words {
                *df.entry(w).or_default() += 1;
            }
        }
        let kept = df.into_iter().filter(|(_, n)| *n >= min_doc_freq.max(1)).map(|(w, _)| w).collect();
        Self::new(kept, length_normalize)
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    /// Tokens in index order.
    pub fn tokens(&self) -> Vec<&str> {
        let mut out = vec![""; self.vocabulary.len()];
        for (t, &i) in &self.vocabulary {
            out[i] = t;
        }
        out
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.vocabulary.get(token).copied()
    }

    /// Sparse (index, value) features. Out-of-vocabulary tokens are dropped
    /// but still count toward the normalizing length.
    pub fn features(&self, text: &str) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        let mut total = 0usize;
        for raw in text.split_whitespace() {
            let Some(w) = normalize_word(raw) else { continue };
            total += 1;
            if let Some(&i) = self.vocabulary.get(&w) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let scale = if self.length_normalize && total > 0 { 1.0 / total as f64 } else { 1.0 };
        counts.into_iter().map(|(i, c)| (i, c * scale)).collect()
    }

    pub fn dense(&self, text: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, v) in self.features(text) {
            out[i] = v;
        }
        out
    }
}

/// Something that maps texts to five trait scores in `[0, 1]`.
pub trait TraitScorer {
    fn score(&self, texts: &[&str]) -> Result<Vec<ContinuousLabels>, ScorerError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTraitScorer {
    pub featurizer: Featurizer,
    /// One row of length `featurizer.len()` per trait.
    pub weights: [Vec<f64>; 5],
    pub bias: [f64; 5],
    /// Tertile thresholds of the training labels, per trait.
    pub thresholds: Option<[TertileThresholds; 5]>,
}

impl LinearTraitScorer {
    pub fn validate(&self) -> Result<(), ScorerError> {
        if self.weights.iter().any(|w| w.len() != self.featurizer.len()) {
            return Err(ScorerError::InvalidModel("weight row length differs from vocabulary size"));
        }
        if self.weights.iter().flatten().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(ScorerError::InvalidModel("non-finite parameter"));
        }
        Ok(())
    }

    /// Unclamped linear outputs.
    pub fn predict_raw(&self, text: &str) -> [f64; 5] {
        predict_sparse(&self.weights, &self.bias, &self.featurizer.features(text))
    }

    /// Linear outputs clamped to `[0, 1]`.
    pub fn predict_traits(&self, text: &str) -> ContinuousLabels {
        TraitValues(self.predict_raw(text).map(|v| v.clamp(0.0, 1.0)))
    }
}

impl TraitScorer for LinearTraitScorer {
    fn score(&self, texts: &[&str]) -> Result<Vec<ContinuousLabels>, ScorerError> {
        Ok(texts.iter().map(|t| self.predict_traits(t)).collect())
    }
}

fn predict_sparse(weights: &[Vec<f64>; 5], bias: &[f64; 5], x: &[(usize, f64)]) -> [f64; 5] {
    core::array::from_fn(|k| bias[k] + x.iter().map(|&(i, v)| weights[k][i] * v).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub l2_lambda: f64,
    pub min_doc_freq: usize,
    pub length_normalize: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { l2_lambda: 1.0, min_doc_freq: 2, length_normalize: false }
    }
}

/// Cholesky factorization of a symmetric positive definite matrix stored
/// row-major; returns the lower factor.
fn cholesky(a: &[f64], n: usize, strict: bool) -> Result<Vec<f64>, ScorerError> {
    let mut l = vec![0.0; n * n];
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let tol = if strict { max_diag * 1e-10 } else { 0.0 };
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !d.is_finite() || d <= tol {
            return Err(ScorerError::SingularSystem);
        }
        let d = libm::sqrt(d);
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Closed-form ridge regression `min ||Xw + b - y||^2 + lambda ||w||^2` per
/// output with an unpenalized bias, on an already featurized dense design.
/// Solves the primal system when features <= rows, the dual otherwise.
pub fn ridge_fit(x: &[Vec<f64>], y: &[[f64; 5]], lambda: f64) -> Result<([Vec<f64>; 5], [f64; 5]), ScorerError> {
    let n = x.len();
    if n == 0 {
        return Err(ScorerError::EmptyCorpus);
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(ScorerError::InvalidLambda(lambda));
    }
    let p = x[0].len();
    let x_mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let y_mean: [f64; 5] = core::array::from_fn(|k| y.iter().map(|r| r[k]).sum::<f64>() / n as f64);
    let xc: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&x_mean).map(|(v, m)| v - m).collect()).collect();
    let strict = lambda == 0.0;

    let mut weights: [Vec<f64>; 5] = core::array::from_fn(|_| vec![0.0; p]);
    if p > 0 && p <= n {
        let mut a = vec![0.0; p * p];
        for row in &xc {
            for i in 0..p {
                if row[i] == 0.0 {
                    continue;
                }
                for j in 0..p {
                    a[i * p + j] += row[i] * row[j];
                }
            }
        }
        for i in 0..p {
            a[i * p + i] += lambda;
        }
        let l = cholesky(&a, p, strict)?;
        for (k, w) in weights.iter_mut().enumerate() {
            let mut rhs = vec![0.0; p];
            for (row, target) in xc.iter().zip(y) {
                let yc = target[k] - y_mean[k];
                for j in 0..p {
                    rhs[j] += row[j] * yc;
                }
            }
            cholesky_solve(&l, p, &mut rhs);
            *w = rhs;
        }
    } else if p > n {
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let dot: f64 = xc[i].iter().zip(&xc[j]).map(|(a, b)| a * b).sum();
                gram[i * n + j] = dot;
                gram[j * n + i] = dot;
            }
            gram[i * n + i] += lambda;
        }
        let l = cholesky(&gram, n, strict)?;
        for (k, w) in weights.iter_mut().enumerate() {
            let mut alpha: Vec<f64> = y.iter().map(|r| r[k] - y_mean[k]).collect();
            cholesky_solve(&l, n, &mut alpha);
            for (row, a) in xc.iter().zip(&alpha) {
                for j in 0..p {
                    w[j] += a * row[j];
                }
            }
        }
    }
    let bias = core::array::from_fn(|k| y_mean[k] - weights[k].iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>());
    Ok((weights, bias))
}

/// Trains a scorer on (text, labels) pairs.
pub fn train_linear_scorer<S: AsRef<str>>(
    corpus: &[(S, ContinuousLabels)],
    options: &TrainOptions,
) -> Result<LinearTraitScorer, ScorerError> {
    if corpus.is_empty() {
        return Err(ScorerError::EmptyCorpus);
    }
    for (row, (text, labels)) in corpus.iter().enumerate() {
        if text.as_ref().trim().is_empty() {
            return Err(ScorerError::EmptyText(row));
        }
        check_labels(labels).map_err(|source| ScorerError::InvalidLabel { row, source })?;
    }
    let texts: Vec<&str> = corpus.iter().map(|(t, _)| t.as_ref()).collect();
    let featurizer = Featurizer::fit(&texts, options.min_doc_freq, options.length_normalize);
    let x: Vec<Vec<f64>> = texts.iter().map(|t| featurizer.dense(t)).collect();
    let y: Vec<[f64; 5]> = corpus.iter().map(|(_, l)| l.0).collect();
    let (weights, bias) = ridge_fit(&x, &y, options.l2_lambda)?;
    let thresholds = if corpus.len() >= 3 {
        let mut th = [TertileThresholds { t_lo: 0.0, t_hi: 0.0 }; 5];
        for t in Trait::ALL {
            let column: Vec<f64> = y.iter().map(|r| r[t.index()]).collect();
            th[t.index()] = tertile_thresholds(&column).expect("labels validated and n >= 3");
        }
        Some(th)
    } else {
        None
    };
    let model = LinearTraitScorer { featurizer, weights, bias, thresholds };
    model.validate()?;
    Ok(model)
}

/// Mean squared error over all rows and all five outputs, unclamped.
pub fn mse(weights: &[Vec<f64>; 5], bias: &[f64; 5], x: &[Vec<f64>], y: &[[f64; 5]]) -> f64 {
    let mut total = 0.0;
    for (row, target) in x.iter().zip(y) {
        for k in 0..5 {
            let pred = bias[k] + weights[k].iter().zip(row).map(|(w, v)| w * v).sum::<f64>();
            total += (pred - target[k]) * (pred - target[k]);
        }
    }
    total / (x.len() * 5) as f64
}

/// Gradient of [`mse`] with respect to weights and bias.
pub fn mse_gradient(weights: &[Vec<f64>; 5], bias: &[f64; 5], x: &[Vec<f64>], y: &[[f64; 5]]) -> ([Vec<f64>; 5], [f64; 5]) {
    let p = weights[0].len();
    let scale = 2.0 / (x.len() * 5) as f64;
    let mut gw: [Vec<f64>; 5] = core::array::from_fn(|_| vec![0.0; p]);
    let mut gb = [0.0; 5];
    for (row, target) in x.iter().zip(y) {
        for k in 0..5 {
            let pred = bias[k] + weights[k].iter().zip(row).map(|(w, v)| w * v).sum::<f64>();
            let r = scale * (pred - target[k]);
            gb[k] += r;
            for (g, v) in gw[k].iter_mut().zip(row) {
                *g += r * v;
            }
        }
    }
    (gw, gb)
}

/// How continuous predictions are binarized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binarization {
    /// High iff score > midpoint; ties go Low.
    Midpoint(f64),
    /// Tertile buckets per trait; a Mid prediction counts as wrong.
    Tertile([TertileThresholds; 5]),
}

impl Binarization {
    pub fn scale_midpoint() -> Self {
        Binarization::Midpoint(0.5)
    }

    pub fn level(&self, t: Trait, score: f64) -> Option<Level> {
        match self {
            Binarization::Midpoint(m) => Some(if score > *m { Level::High } else { Level::Low }),
            Binarization::Tertile(th) => th[t.index()].bucket(score).level(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// `None` for traits without evaluation examples.
    pub per_trait: [Option<f64>; 5],
    pub counts: [usize; 5],
    /// Mean over traits that have examples.
    pub average: f64,
}

/// Fraction of examples whose binarized score for the labeled trait equals
/// the labeled level.
pub fn evaluate_binary_accuracy<S: AsRef<str>>(
    scorer: &(impl TraitScorer + ?Sized),
    labeled: &[(S, TraitSpec)],
    rule: &Binarization,
) -> Result<AccuracyReport, ScorerError> {
    if labeled.is_empty() {
        return Err(ScorerError::EmptyEvaluationSet);
    }
    let texts: Vec<&str> = labeled.iter().map(|(t, _)| t.as_ref()).collect();
    let scores = scorer.score(&texts)?;
    if scores.len() != labeled.len() {
        return Err(ScorerError::Backend(alloc::format!("expected {} scores, got {}", labeled.len(), scores.len())));
    }
    let mut correct = [0usize; 5];
    let mut counts = [0usize; 5];
    for ((_, spec), s) in labeled.iter().zip(&scores) {
        let t = spec.trait_name;
        counts[t.index()] += 1;
        if rule.level(t, s[t]) == Some(spec.level) {
            correct[t.index()] += 1;
        }
    }
    let per_trait: [Option<f64>; 5] = core::array::from_fn(|i| (counts[i] > 0).then(|| correct[i] as f64 / counts[i] as f64));
    let present: Vec<f64> = per_trait.iter().flatten().copied().collect();
    let average = present.iter().sum::<f64>() / present.len() as f64;
    Ok(AccuracyReport { per_trait, counts, average })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    #[test]
    fn constant_labels_give_constant_predictions() {
        let corpus: Vec<(&str, ContinuousLabels)> =
            ["a b", "b c", "a c", "c c a"].into_iter().map(|t| (t, TraitValues::splat(0.3))).collect();
        let m = train_linear_scorer(&corpus, &TrainOptions::default()).unwrap();
        for t in ["a", "zzz", "a b c c"] {
            for v in m.predict_traits(t).0 {
                assert!((v - 0.3).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_weights_and_oov() {
        let m = LinearTraitScorer {
            featurizer: Featurizer::new(vec!["x".into()], false),
            weights: core::array::from_fn(|_| vec![0.0]),
            bias: [0.5; 5],
            thresholds: None,
        };
        assert_eq!(m.predict_traits("anything here"), TraitValues::splat(0.5));
        let clamped = LinearTraitScorer { bias: [1.7, -0.2, 0.5, 0.0, 1.0], ..m };
        assert_eq!(clamped.predict_traits("unknown words").0, [1.0, 0.0, 0.5, 0.0, 1.0]);
    }

    #[test]
    fn empty_corpus_and_bad_labels() {
        let empty: Vec<(&str, ContinuousLabels)> = vec![];
        assert_eq!(train_linear_scorer(&empty, &TrainOptions::default()), Err(ScorerError::EmptyCorpus));
        let bad = vec![("a", TraitValues::splat(1.5))];
        assert!(matches!(train_linear_scorer(&bad, &TrainOptions::default()), Err(ScorerError::InvalidLabel { .. })));
        let blank = vec![(" ", TraitValues::splat(0.5))];
        assert_eq!(train_linear_scorer(&blank, &TrainOptions::default()), Err(ScorerError::EmptyText(0)));
    }

    #[test]
    fn singular_without_regularization() {
        // "a" and "b" always co-occur: collinear columns
        let corpus: Vec<(String, ContinuousLabels)> =
            (0..6).map(|i| (format!("{} c", "a b ".repeat(i % 3 + 1)), TraitValues::splat(0.1 * i as f64))).collect();
        let opts = TrainOptions { l2_lambda: 0.0, min_doc_freq: 1, length_normalize: false };
        assert_eq!(train_linear_scorer(&corpus, &opts), Err(ScorerError::SingularSystem));
        let opts = TrainOptions { l2_lambda: 0.1, ..opts };
        assert!(train_linear_scorer(&corpus, &opts).is_ok());
    }

    #[test]
    fn featurizer_min_df_and_normalization() {
        let f = Featurizer::fit(&["Apple pie", "apple tart", "pie"], 2, true);
        assert_eq!(f.tokens(), vec!["apple", "pie"]);
        assert_eq!(f.features("apple apple banana pie"), vec![(0, 0.5), (1, 0.25)]);
    }

    #[test]
    fn midpoint_tie_goes_low() {
        let r = Binarization::scale_midpoint();
        assert_eq!(r.level(Trait::Openness, 0.5), Some(Level::Low));
        assert_eq!(r.level(Trait::Openness, 0.5000001), Some(Level::High));
    }
}
