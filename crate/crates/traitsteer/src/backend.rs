//! Logit backends: toy n-gram models trained from small corpora, or remote
//! endpoints. One base source plus one expert per trait and level.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use traitsteer_core::logits::{LogitVector, TokenId, VocabSpec};
use traitsteer_core::ngram::NgramModel;
use traitsteer_core::personality::TraitSpec;
use traitsteer_core::steering::{LogitSource, SourceError};
use traitsteer_core::text::{ByteTokenizer, WordTokenizer};

use crate::config::{BackendConfig, BackendKind};
use crate::error::{Error, Result};
use crate::remote::{RemoteEndpoint, SharedTokenizer, Transport};

pub const DEMO_BASE: &str = concat!(include_str!("../data/demo/base.txt"), include_str!("../data/demo/answers.txt"));

/// Embedded demo corpus for each expert.
pub fn demo_expert_corpus(spec: TraitSpec) -> &'static str {
    use traitsteer_core::personality::{Level::*, Trait::*};
    match (spec.trait_name, spec.level) {
        (Openness, High) => include_str!("../data/demo/openness-high.txt"),
        (Openness, Low) => include_str!("../data/demo/openness-low.txt"),
        (Conscientiousness, High) => include_str!("../data/demo/conscientiousness-high.txt"),
        (Conscientiousness, Low) => include_str!("../data/demo/conscientiousness-low.txt"),
        (Extraversion, High) => include_str!("../data/demo/extraversion-high.txt"),
        (Extraversion, Low) => include_str!("../data/demo/extraversion-low.txt"),
        (Agreeableness, High) => include_str!("../data/demo/agreeableness-high.txt"),
        (Agreeableness, Low) => include_str!("../data/demo/agreeableness-low.txt"),
        (Neuroticism, High) => include_str!("../data/demo/neuroticism-high.txt"),
        (Neuroticism, Low) => include_str!("../data/demo/neuroticism-low.txt"),
    }
}

/// `openness-high` style names used for expert files and config keys.
pub fn spec_key(spec: TraitSpec) -> String {
    format!("{}-{}", spec.trait_name.name(), spec.level.name())
}

pub fn parse_spec_key(key: &str) -> Option<TraitSpec> {
    let (t, l) = key.split_once('-')?;
    Some(TraitSpec::new(t.parse().ok()?, l.parse().ok()?))
}

#[derive(Clone)]
pub enum Backend {
    Toy(Arc<NgramModel>),
    Remote(RemoteEndpoint),
}

impl LogitSource for Backend {
    fn model_id(&self) -> &str {
        match self {
            Backend::Toy(m) => m.model_id(),
            Backend::Remote(r) => r.model_id(),
        }
    }

    fn vocab(&self) -> &VocabSpec {
        match self {
            Backend::Toy(m) => m.vocab(),
            Backend::Remote(r) => r.vocab(),
        }
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector, SourceError> {
        match self {
            Backend::Toy(m) => LogitSource::next_logits(m.as_ref(), context),
            Backend::Remote(r) => r.next_logits(context),
        }
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, SourceError> {
        match self {
            Backend::Toy(m) => LogitSource::encode(m.as_ref(), text),
            Backend::Remote(r) => r.encode(text),
        }
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, SourceError> {
        match self {
            Backend::Toy(m) => LogitSource::decode(m.as_ref(), tokens),
            Backend::Remote(r) => r.decode(tokens),
        }
    }
}

/// Sources indexed by trait and level.
pub trait Experts: Sync {
    type Source: LogitSource + Sync + ?Sized;
    fn expert(&self, spec: TraitSpec) -> &Self::Source;
}

impl<S: LogitSource + Sync> Experts for BTreeMap<TraitSpec, S> {
    type Source = S;
    fn expert(&self, spec: TraitSpec) -> &S {
        &self[&spec]
    }
}

pub struct BackendSet {
    pub base: Backend,
    pub experts: BTreeMap<TraitSpec, Backend>,
}

impl Experts for BackendSet {
    type Source = Backend;
    fn expert(&self, spec: TraitSpec) -> &Backend {
        &self.experts[&spec]
    }
}

/// Base and expert corpora for toy models.
pub struct ToyCorpora {
    pub base: String,
    pub experts: BTreeMap<TraitSpec, String>,
}

impl ToyCorpora {
    pub fn demo() -> Self {
        Self { base: DEMO_BASE.to_string(), experts: TraitSpec::all().map(|s| (s, demo_expert_corpus(s).to_string())).collect() }
    }

    /// `base.txt` plus `{trait}-{level}.txt` for every expert.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: String| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let base = read("base.txt".into())?;
        let mut experts = BTreeMap::new();
        for s in TraitSpec::all() {
            experts.insert(s, read(format!("{}.txt", spec_key(s)))?);
        }
        Ok(Self { base, experts })
    }

    /// Trains every model over one shared vocabulary.
    pub fn train(&self, order: usize, alpha: f64) -> Result<BackendSet> {
        let texts = std::iter::once(self.base.as_str()).chain(self.experts.values().map(String::as_str));
        let tok = Arc::new(WordTokenizer::from_texts(texts, &[WordTokenizer::UNKNOWN])?);
        let base = NgramModel::train("toy-base", tok.clone(), &self.base, order, alpha)?;
        let mut experts = BTreeMap::new();
        for (spec, corpus) in &self.experts {
            let m = NgramModel::train(format!("toy-{}", spec_key(*spec)), tok.clone(), corpus, order, alpha)?;
            experts.insert(*spec, Backend::Toy(Arc::new(m)));
        }
        Ok(BackendSet { base: Backend::Toy(Arc::new(base)), experts })
    }
}

fn remote_tokenizer(spec: Option<&str>) -> Result<SharedTokenizer> {
    match spec.unwrap_or("bytes") {
        "bytes" => Ok(Arc::new(ByteTokenizer::default())),
        path => {
            let p = Path::new(path);
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let words: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            Ok(Arc::new(WordTokenizer::new(words).map_err(|e| Error::from(e).file(p))?))
        }
    }
}

pub fn build_backends(cfg: &BackendConfig) -> Result<BackendSet> {
    match cfg.kind {
        BackendKind::Toy => {
            let corpora = match &cfg.corpus_dir {
                Some(dir) => ToyCorpora::from_dir(dir)?,
                None => ToyCorpora::demo(),
            };
            corpora.train(cfg.order.unwrap_or(2), cfg.alpha.unwrap_or(0.01))
        }
        BackendKind::Remote => {
            let url = cfg.url.as_deref().ok_or_else(|| Error::config("backend.url is required for remote backends"))?;
            let base_model =
                cfg.base_model.as_deref().ok_or_else(|| Error::config("backend.base_model is required for remote backends"))?;
            let names = cfg.experts.as_ref().ok_or_else(|| Error::config("backend.experts is required for remote backends"))?;
            let transport = Transport::new(url, Duration::from_millis(cfg.timeout_ms.unwrap_or(30_000)));
            let tok = remote_tokenizer(cfg.tokenizer.as_deref())?;
            let connect = |model: &str| RemoteEndpoint::connect(transport.clone(), model, tok.clone()).map(Backend::Remote).map_err(Error::from);
            let base = connect(base_model)?;
            let mut experts = BTreeMap::new();
            for s in TraitSpec::all() {
                let key = spec_key(s);
                let model = names.get(&key).ok_or_else(|| Error::config(format!("backend.experts is missing `{key}`")))?;
                experts.insert(s, connect(model)?);
            }
            Ok(BackendSet { base, experts })
        }
    }
}
