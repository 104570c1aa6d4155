//! TOML run configuration. Command-line flags override file values, which
//! override the built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_PREFIX_WORDS: usize = 5;
pub const DEFAULT_RUNS: usize = 5;
pub const DEFAULT_TEMPERATURE: f64 = 0.6;
pub const DEFAULT_MAX_NEW_TOKENS: usize = 64;
pub const DEFAULT_RETRIES: usize = 2;
pub const DEFAULT_PER_TOKENS: u64 = 100;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub gamma: Option<f64>,
    pub prefix_words: Option<usize>,
    pub max_new_tokens: Option<usize>,
    pub stop_sequences: Option<Vec<String>>,
    pub worker_count: Option<usize>,
    pub seed: Option<u64>,
    pub retries: Option<usize>,
    pub temperature: Option<f64>,
    pub runs: Option<usize>,
    pub questionnaire: Option<String>,
    pub persona: Option<String>,
    pub per_tokens: Option<u64>,
    pub l2_lambda: Option<f64>,
    pub min_doc_freq: Option<usize>,
    pub length_normalize: Option<bool>,
    pub backend: Option<BackendConfig>,
    pub scorer_url: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Toy,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub kind: BackendKind,
    /// Toy: directory holding `base.txt` and `{trait}-{level}.txt`.
    pub corpus_dir: Option<PathBuf>,
    pub order: Option<usize>,
    pub alpha: Option<f64>,
    /// Remote: endpoint root, base model id, and expert ids keyed `openness-high` etc.
    pub url: Option<String>,
    pub base_model: Option<String>,
    pub experts: Option<BTreeMap<String, String>>,
    pub timeout_ms: Option<u64>,
    /// `bytes` or a path to a word list, one token per line.
    pub tokenizer: Option<String>,
}

impl BackendConfig {
    fn validate(&self) -> Result<()> {
        if self.order == Some(0) {
            return Err(Error::config("backend.order must be at least 1"));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config(format!("backend.alpha must be positive, got {a}")));
            }
        }
        if let Some(experts) = &self.experts {
            for key in experts.keys() {
                if crate::backend::parse_spec_key(key).is_none() {
                    return Err(Error::config(format!("backend.experts: unknown key `{key}`")));
                }
            }
        }
        if let Some(dir) = &self.corpus_dir {
            if !dir.is_dir() {
                return Err(Error::config(format!("backend.corpus_dir {} is not a directory", dir.display())));
            }
        }
        Ok(())
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: FileConfig = toml::from_str(&text).map_err(|e| {
            let err = Error::config(e.message().to_string()).file(path);
            match e.span() {
                Some(span) => err.line(text[..span.start].matches('\n').count() + 1),
                None => err,
            }
        })?;
        cfg.validate().map_err(|e| e.file(path))?;
        Ok(cfg)
    }

    pub fn load_optional(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Range checks shared by file values and command-line overrides.
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::config(format!("gamma must be a finite value >= 0, got {g}")));
            }
        }
        if let Some(t) = self.temperature {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config(format!("temperature must be > 0, got {t}")));
            }
        }
        if self.max_new_tokens == Some(0) {
            return Err(Error::config("max_new_tokens must be at least 1"));
        }
        if self.worker_count == Some(0) {
            return Err(Error::config("worker_count must be at least 1"));
        }
        if self.runs == Some(0) {
            return Err(Error::config("runs must be at least 1"));
        }
        if self.per_tokens == Some(0) {
            return Err(Error::config("per_tokens must be at least 1"));
        }
        if let Some(l) = self.l2_lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::config(format!("l2_lambda must be >= 0, got {l}")));
            }
        }
        if let Some(stops) = &self.stop_sequences {
            if stops.iter().any(String::is_empty) {
                return Err(Error::config("stop_sequences must not contain empty strings"));
            }
        }
        if let Some(b) = &self.backend {
            b.validate()?;
        }
        Ok(())
    }

    /// Overlays `other` (values from the command line) onto `self`.
    pub fn overlay(mut self, other: FileConfig) -> Result<Self> {
        macro_rules! take {
            ($($f:ident),*) => { $(if other.$f.is_some() { self.$f = other.$f; })* };
        }
        take!(gamma, prefix_words, max_new_tokens, stop_sequences, worker_count, seed, retries, temperature, runs,
              questionnaire, persona, per_tokens, l2_lambda, min_doc_freq, length_normalize, backend, scorer_url);
        self.validate()?;
        Ok(self)
    }

    pub fn backend(&self) -> BackendConfig {
        self.backend.clone().unwrap_or_default()
    }

    /// Stop sequences, defaulting to the toy corpora's end marker or a newline
    /// for remote models.
    pub fn stop_sequences(&self) -> Vec<String> {
        match (&self.stop_sequences, self.backend().kind) {
            (Some(s), _) => s.clone(),
            (None, BackendKind::Toy) => vec!["<eos>".into()],
            (None, BackendKind::Remote) => vec!["\n".into()],
        }
    }

    pub fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed.ok_or_else(|| Error::config(format!("{command} requires a seed (--seed or `seed` in the config file)")))
    }
}

/// Fails unless every input exists and every output directory does.
pub fn check_paths(inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    for p in inputs {
        if !p.is_file() {
            return Err(Error::config(format!("input file {} does not exist", p.display())).file(p));
        }
    }
    for p in outputs {
        let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !dir.is_dir() {
            return Err(Error::config(format!("output directory {} does not exist", dir.display())).file(p));
        }
        if p.is_dir() {
            return Err(Error::config(format!("output path {} is a directory", p.display())).file(p));
        }
    }
    Ok(())
}
