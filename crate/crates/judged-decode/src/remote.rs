//! HTTP client for a logits server.
//!
//! Endpoints: `GET /v1/model_info`, `POST /v1/logprobs`, `POST /v1/tokenize`
//! and `POST /v1/detokenize`. Log-probabilities come back dense or sparse and
//! are exponentiated and renormalized here.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use judged_decode_core::dist::normalize;
use judged_decode_core::source::check_context_len;
use judged_decode_core::{Distribution, Error, ProbabilitySource, TokenId};
use serde::{Deserialize, Serialize};

/// Environment variable holding the per-request timeout in milliseconds.
pub const TIMEOUT_ENV: &str = "JUDGED_DECODE_REMOTE_TIMEOUT_MS";
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
/// Largest number of contexts sent in one logprobs request.
pub const MAX_BATCH: usize = 64;
/// Allowed deviation from unit mass after exponentiating a dense vector.
pub const WIRE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub vocab_size: usize,
    pub eos_id: Option<u32>,
    pub max_context: usize,
    #[serde(default)]
    pub name: String,
    /// Non-zero when the server truncates its vectors to the top entries.
    #[serde(default)]
    pub top_k_return: usize,
}

#[derive(Serialize)]
struct LogprobsRequest<'a> {
    contexts: Vec<&'a [u32]>,
}

#[derive(Deserialize)]
struct LogprobsResponse {
    results: Vec<LogprobsResult>,
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum LogprobsResult {
    Dense(Vec<f64>),
    Sparse(SparseLogprobs),
}

#[derive(Deserialize)]
struct SparseLogprobs {
    ids: Vec<u32>,
    logprobs: Vec<f64>,
}

#[derive(Serialize)]
struct TokenizeRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct TokenizeResponse {
    tokens: Vec<u32>,
}

#[derive(Serialize)]
struct DetokenizeRequest<'a> {
    tokens: &'a [u32],
}

#[derive(Deserialize)]
struct DetokenizeResponse {
    text: String,
}

/// A [`ProbabilitySource`] backed by a logits server.
///
/// Requests share one connection pool, so the client can be queried from
/// several threads at once.
#[derive(Debug)]
pub struct RemoteSource {
    base: String,
    agent: ureq::Agent,
    info: ModelInfo,
    sparse_warned: AtomicBool,
}

fn timeout_from_env() -> Duration {
    let ms = std::env::var(TIMEOUT_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_TIMEOUT_MS);
    Duration::from_millis(ms)
}

impl RemoteSource {
    /// Connects and fetches the model constants. The timeout is read from
    /// [`TIMEOUT_ENV`].
    pub fn connect(base_url: &str) -> Result<Self, Error> {
        Self::connect_with_timeout(base_url, timeout_from_env())
    }

    pub fn connect_with_timeout(base_url: &str, timeout: Duration) -> Result<Self, Error> {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        let base = base_url.trim_end_matches('/').to_string();
        let info: ModelInfo = decode(agent.get(&format!("{base}/v1/model_info")).call(), 0, 0)?;
        if info.vocab_size == 0 || info.max_context == 0 {
            return Err(Error::Protocol(format!(
                "model_info reports vocab_size {} and max_context {}",
                info.vocab_size, info.max_context
            )));
        }
        if info.eos_id.is_some_and(|e| e as usize >= info.vocab_size) {
            return Err(Error::Protocol("eos_id lies outside the vocabulary".into()));
        }
        let source = RemoteSource { base, agent, info, sparse_warned: AtomicBool::new(false) };
        if source.info.top_k_return > 0 {
            source.warn_sparse();
        }
        Ok(source)
    }

    pub fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn warn_sparse(&self) {
        if !self.sparse_warned.swap(true, Ordering::Relaxed) {
            log::warn!(
                "server {} returns sparse log-probabilities; tokens outside the returned set get probability 0 \
                 and sampling no longer follows the full model distribution",
                self.base
            );
        }
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &Req,
        longest: usize,
    ) -> Result<Resp, Error> {
        let url = format!("{}{path}", self.base);
        decode(self.agent.post(&url).send_json(body), longest, self.info.max_context)
    }

    fn to_distribution(&self, result: LogprobsResult) -> Result<Distribution, Error> {
        let vocab = self.info.vocab_size;
        match result {
            LogprobsResult::Dense(logprobs) => {
                if logprobs.len() != vocab {
                    return Err(Error::Protocol(format!(
                        "dense vector has {} entries, expected {vocab}",
                        logprobs.len()
                    )));
                }
                let probs: Vec<f64> = logprobs.iter().map(|lp| lp.exp()).collect();
                check_probs(&probs)?;
                let mass: f64 = probs.iter().sum();
                if (mass - 1.0).abs() > WIRE_TOLERANCE {
                    return Err(Error::Protocol(format!("dense probabilities sum to {mass}")));
                }
                normalize(probs).map_err(|e| Error::Protocol(e.to_string()))
            }
            LogprobsResult::Sparse(sparse) => {
                self.warn_sparse();
                if sparse.ids.len() != sparse.logprobs.len() {
                    return Err(Error::Protocol("sparse ids and logprobs differ in length".into()));
                }
                let mut probs = vec![0.0; vocab];
                for (&id, lp) in sparse.ids.iter().zip(&sparse.logprobs) {
                    let slot = probs
                        .get_mut(id as usize)
                        .ok_or_else(|| Error::Protocol(format!("sparse token {id} outside vocabulary")))?;
                    if *slot != 0.0 {
                        return Err(Error::Protocol(format!("sparse token {id} listed twice")));
                    }
                    *slot = lp.exp();
                }
                check_probs(&probs)?;
                let mass: f64 = probs.iter().sum();
                if mass > 1.0 + WIRE_TOLERANCE {
                    return Err(Error::Protocol(format!("sparse probabilities sum to {mass}")));
                }
                normalize(probs).map_err(|e| Error::Protocol(e.to_string()))
            }
        }
    }
}

fn check_probs(probs: &[f64]) -> Result<(), Error> {
    match probs.iter().position(|p| !p.is_finite()) {
        Some(i) => Err(Error::Protocol(format!("log-probability at index {i} is not finite"))),
        None => Ok(()),
    }
}

/// Maps HTTP outcomes onto engine errors: 422 means the context was too
/// long, 503 and transport failures mean the backend is unavailable, any
/// other status is a protocol violation.
fn decode<T: for<'de> Deserialize<'de>>(
    outcome: Result<ureq::Response, ureq::Error>,
    longest: usize,
    max_context: usize,
) -> Result<T, Error> {
    match outcome {
        Ok(resp) => resp.into_json().map_err(|e| Error::Protocol(format!("malformed response body: {e}"))),
        Err(ureq::Error::Status(422, _)) => Err(Error::ContextTooLong { len: longest, max: max_context }),
        Err(ureq::Error::Status(503, resp)) => {
            Err(Error::BackendUnavailable(format!("503 {}", resp.into_string().unwrap_or_default())))
        }
        Err(ureq::Error::Status(code, resp)) => {
            Err(Error::Protocol(format!("HTTP {code}: {}", resp.into_string().unwrap_or_default())))
        }
        Err(ureq::Error::Transport(t)) => Err(Error::BackendUnavailable(t.to_string())),
    }
}

impl ProbabilitySource for RemoteSource {
    fn vocab_size(&self) -> usize {
        self.info.vocab_size
    }

    fn eos_token(&self) -> Option<TokenId> {
        self.info.eos_id.map(TokenId)
    }

    fn max_context(&self) -> usize {
        self.info.max_context
    }

    fn next_distribution(&self, ctx: &[TokenId]) -> Result<Distribution, Error> {
        let mut out = self.next_distributions_batch(&[ctx.to_vec()])?;
        Ok(out.remove(0))
    }

    /// One request per chunk of at most [`MAX_BATCH`] contexts.
    fn next_distributions_batch(&self, ctxs: &[Vec<TokenId>]) -> Result<Vec<Distribution>, Error> {
        let mut out = Vec::with_capacity(ctxs.len());
        for chunk in ctxs.chunks(MAX_BATCH) {
            let raw: Vec<Vec<u32>> = chunk.iter().map(|c| c.iter().map(|t| t.0).collect()).collect();
            let longest = raw.iter().map(Vec::len).max().unwrap_or(0);
            check_context_len(longest, self.info.max_context)?;
            let request = LogprobsRequest { contexts: raw.iter().map(Vec::as_slice).collect() };
            let resp: LogprobsResponse = self.post("/v1/logprobs", &request, longest)?;
            if resp.results.len() != chunk.len() {
                return Err(Error::Protocol(format!("{} results for {} contexts", resp.results.len(), chunk.len())));
            }
            for result in resp.results {
                out.push(self.to_distribution(result)?);
            }
        }
        Ok(out)
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, Error> {
        let resp: TokenizeResponse = self.post("/v1/tokenize", &TokenizeRequest { text }, 0)?;
        if let Some(t) = resp.tokens.iter().find(|&&t| t as usize >= self.info.vocab_size) {
            return Err(Error::Protocol(format!("tokenizer returned id {t} outside vocabulary")));
        }
        Ok(resp.tokens.into_iter().map(TokenId).collect())
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<Option<String>, Error> {
        let raw: Vec<u32> = tokens.iter().map(|t| t.0).collect();
        let resp: DetokenizeResponse = self.post("/v1/detokenize", &DetokenizeRequest { tokens: &raw }, 0)?;
        Ok(Some(resp.text))
    }
}
