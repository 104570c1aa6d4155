//! HTTP clients for remote logit endpoints and remote trait scorers.
//!
//! ```text
//! GET  {base}/v1/vocab?model={id}   -> {"vocab_id": str, "size": int}
//! POST {base}/v1/logits {"model": str, "context_tokens": [int]} -> {"logits": [number]}
//! POST {base}/v1/score  {"texts": [str]} -> {"scores": [[5 numbers]]}
//! ```
//!
//! A status of 400 or above carrying `{"error": str}` is a protocol error.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use traitsteer_core::logits::{LogitVector, TokenId, VocabSpec};
use traitsteer_core::personality::{ContinuousLabels, TraitValues};
use traitsteer_core::scorer::{ScorerError, TraitScorer};
use traitsteer_core::steering::{LogitSource, SourceError, SourceErrorKind};
use traitsteer_core::text::Tokenizer;

pub type SharedTokenizer = Arc<dyn Tokenizer + Send + Sync>;

#[derive(Debug, Deserialize)]
struct VocabResponse {
    vocab_id: String,
    size: usize,
}

#[derive(Serialize)]
struct LogitsRequest<'a> {
    model: &'a str,
    context_tokens: &'a [TokenId],
}

#[derive(Deserialize)]
struct LogitsResponse {
    logits: Vec<f64>,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<[f64; 5]>,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

/// Stateless JSON-over-HTTP transport. Cloning shares the connection pool.
#[derive(Clone)]
pub struct Transport {
    agent: ureq::Agent,
    base_url: String,
    timeout: Duration,
}

impl Transport {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build();
        Self { agent: ureq::Agent::new_with_config(config), base_url: base_url.trim_end_matches('/').to_string(), timeout }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn get<T: DeserializeOwned>(&self, path: &str, query: &[(&str, &str)]) -> Result<T, SourceError> {
        let url = format!("{}{path}", self.base_url);
        let start = Instant::now();
        let mut req = self.agent.get(&url);
        for (k, v) in query {
            req = req.query(*k, *v);
        }
        let resp = req.call().map_err(|e| transport_error(&url, e, start))?;
        decode(&url, resp, start)
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, SourceError> {
        let url = format!("{}{path}", self.base_url);
        let start = Instant::now();
        let resp = self.agent.post(&url).send_json(body).map_err(|e| transport_error(&url, e, start))?;
        decode(&url, resp, start)
    }
}

fn transport_error(url: &str, e: ureq::Error, start: Instant) -> SourceError {
    let elapsed = start.elapsed();
    let timed_out = matches!(&e, ureq::Error::Timeout(_))
        || matches!(&e, ureq::Error::Io(io) if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock));
    if timed_out {
        SourceError::new(SourceErrorKind::Transport, format!("{url}: timed out after {} ms", elapsed.as_millis()))
    } else {
        SourceError::new(SourceErrorKind::Transport, format!("{url}: {e} (after {} ms)", elapsed.as_millis()))
    }
}

fn decode<T: DeserializeOwned>(url: &str, mut resp: ureq::http::Response<ureq::Body>, start: Instant) -> Result<T, SourceError> {
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(|e| transport_error(url, e, start))?;
    if status >= 400 {
        let detail = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
        return Err(SourceError::new(SourceErrorKind::Protocol, format!("{url}: HTTP {status}: {detail}")));
    }
    serde_json::from_str(&text).map_err(|e| SourceError::new(SourceErrorKind::Protocol, format!("{url}: malformed body: {e}")))
}

/// A remote model exposed as a [`LogitSource`]. Tokenization happens locally
/// with a tokenizer whose size must match the server's vocabulary.
#[derive(Clone)]
pub struct RemoteEndpoint {
    transport: Transport,
    model_id: String,
    vocab: VocabSpec,
    tokenizer: SharedTokenizer,
}

impl RemoteEndpoint {
    /// Fetches the vocabulary before any generation can start.
    pub fn connect(transport: Transport, model_id: &str, tokenizer: SharedTokenizer) -> Result<Self, SourceError> {
        let v: VocabResponse = transport.get("/v1/vocab", &[("model", model_id)])?;
        if v.size == 0 {
            return Err(SourceError::new(SourceErrorKind::Protocol, format!("{model_id}: server reported an empty vocabulary")));
        }
        if tokenizer.spec().size != v.size {
            return Err(SourceError::new(
                SourceErrorKind::LengthMismatch,
                format!("{model_id}: server vocabulary has {} entries, local tokenizer {}", v.size, tokenizer.spec().size),
            ));
        }
        Ok(Self { transport, model_id: model_id.to_string(), vocab: VocabSpec::new(v.vocab_id, v.size), tokenizer })
    }

    pub fn transport(&self) -> &Transport {
        &self.transport
    }
}

impl LogitSource for RemoteEndpoint {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn vocab(&self) -> &VocabSpec {
        &self.vocab
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector, SourceError> {
        if context.is_empty() {
            return Err(SourceError::new(SourceErrorKind::Other, "empty context"));
        }
        let resp: LogitsResponse = self.transport.post("/v1/logits", &LogitsRequest { model: &self.model_id, context_tokens: context })?;
        if resp.logits.len() != self.vocab.size {
            return Err(SourceError::new(
                SourceErrorKind::LengthMismatch,
                format!("{}: {} logits for a vocabulary of {}", self.model_id, resp.logits.len(), self.vocab.size),
            ));
        }
        LogitVector::new(resp.logits).map_err(|e| SourceError::new(SourceErrorKind::Protocol, e.to_string()))
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, SourceError> {
        Ok(self.tokenizer.encode(text)?)
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, SourceError> {
        Ok(self.tokenizer.decode(tokens)?)
    }
}

/// A remote trait classifier.
#[derive(Clone)]
pub struct RemoteScorer {
    transport: Transport,
}

impl RemoteScorer {
    pub fn new(transport: Transport) -> Self {
        Self { transport }
    }
}

impl TraitScorer for RemoteScorer {
    fn score(&self, texts: &[&str]) -> Result<Vec<ContinuousLabels>, ScorerError> {
        let resp: ScoreResponse =
            self.transport.post("/v1/score", &ScoreRequest { texts }).map_err(|e| ScorerError::Backend(e.to_string()))?;
        if resp.scores.len() != texts.len() {
            return Err(ScorerError::Backend(format!("{} score rows for {} texts", resp.scores.len(), texts.len())));
        }
        Ok(resp.scores.into_iter().map(TraitValues).collect())
    }
}

/// Wire formatting for numbers: decimal with 9 significant digits.
pub fn wire_number(x: f64) -> String {
    format!("{x:.8e}")
}
