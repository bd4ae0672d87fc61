//! HTTP clients for the entailment (`POST /entail`) and tagger (`POST /tag`)
//! services.
//!
//! Both clients are blocking and must not be called from inside an async
//! runtime thread; the service crate runs pipelines on blocking threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use zsie_core::text::{Pos, Sentence, Tagger, Token};
use zsie_core::{BackendError, EntailmentBackend, EntailmentScore};

/// Sum tolerance for scores coming over the wire. Triples within it are
/// renormalized; anything further off is a malformed response.
pub const WIRE_SIMPLEX_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub max_batch: usize,
    pub max_in_flight: usize,
    pub attempts: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            max_batch: 32,
            max_in_flight: 4,
            attempts: 3,
            initial_backoff: Duration::from_millis(100),
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Serialize)]
struct EntailRequest<'a> {
    premise: &'a str,
    hypotheses: &'a [String],
}

#[derive(Deserialize)]
struct WireScore {
    entail: f64,
    neutral: f64,
    contradict: f64,
}

#[derive(Deserialize)]
struct EntailResponse {
    scores: Vec<WireScore>,
}

#[derive(Serialize)]
struct TagRequest<'a> {
    sentences: Vec<&'a str>,
}

#[derive(Deserialize)]
struct WireToken {
    text: String,
    start: usize,
    end: usize,
    pos: String,
}

#[derive(Deserialize)]
struct WireSentence {
    tokens: Vec<WireToken>,
}

#[derive(Deserialize)]
struct TagResponse {
    sentences: Vec<WireSentence>,
}

/// Shared HTTP plumbing: JSON POST with bounded retries and a request counter.
struct Endpoint {
    client: reqwest::blocking::Client,
    url: String,
    config: ClientConfig,
    requests: AtomicUsize,
}

impl Endpoint {
    fn new(base_url: &str, path: &str, config: ClientConfig) -> Result<Self, BackendError> {
        if config.max_batch == 0 || config.max_in_flight == 0 || config.attempts == 0 {
            return Err(BackendError::Malformed(
                "max_batch, max_in_flight and attempts must be positive".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport {
                message: e.to_string(),
                retryable: false,
            })?;
        Ok(Endpoint {
            client,
            url: format!("{}{path}", base_url.trim_end_matches('/')),
            config,
            requests: AtomicUsize::new(0),
        })
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R, BackendError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let response = self.client.post(&self.url).json(body).send().map_err(|e| BackendError::Transport {
            message: format!("{}: {e}", self.url),
            retryable: e.is_connect() || e.is_timeout() || e.is_request(),
        })?;
        let status = response.status();
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(BackendError::Transport {
                message: format!("{} returned {status}: {detail}", self.url),
                retryable: status.is_server_error() || status.as_u16() == 429,
            });
        }
        let bytes = response.bytes().map_err(|e| BackendError::Transport {
            message: format!("{}: {e}", self.url),
            retryable: true,
        })?;
        serde_json::from_slice(&bytes)
            .map_err(|e| BackendError::Malformed(format!("{} sent an unexpected body: {e}", self.url)))
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R, BackendError> {
        let mut backoff = self.config.initial_backoff;
        let mut attempt = 1;
        loop {
            match self.post_once(body) {
                Err(e) if e.is_retryable() && attempt < self.config.attempts => {
                    log::warn!("attempt {attempt} failed, retrying in {backoff:?}: {e}");
                    thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

fn to_score(w: WireScore, index: usize) -> Result<EntailmentScore, BackendError> {
    let parts = [w.entail, w.neutral, w.contradict];
    let bad = |why: &str| BackendError::Malformed(format!("score {index} ({}, {}, {}): {why}", w.entail, w.neutral, w.contradict));
    if parts.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
        return Err(bad("probabilities must lie in [0, 1]"));
    }
    let sum: f64 = parts.iter().sum();
    if (sum - 1.0).abs() > WIRE_SIMPLEX_TOLERANCE {
        return Err(bad("probabilities must sum to 1"));
    }
    EntailmentScore::new(w.entail / sum, w.neutral / sum, w.contradict / sum).map_err(|e| bad(&e.to_string()))
}

type ChunkResult = Result<Vec<EntailmentScore>, BackendError>;

/// Client for a remote entailment model. Hypotheses are split into batches
/// of at most `max_batch`, sent with up to `max_in_flight` requests at once.
pub struct HttpEntailmentBackend {
    endpoint: Endpoint,
}

impl HttpEntailmentBackend {
    pub fn new(base_url: &str, config: ClientConfig) -> Result<Self, BackendError> {
        Ok(HttpEntailmentBackend {
            endpoint: Endpoint::new(base_url, "/entail", config)?,
        })
    }

    /// Number of HTTP requests sent so far, retries included.
    pub fn request_count(&self) -> usize {
        self.endpoint.requests.load(Ordering::SeqCst)
    }

    fn score_chunk(&self, premise: &str, hypotheses: &[String]) -> Result<Vec<EntailmentScore>, BackendError> {
        let response: EntailResponse = self.endpoint.post(&EntailRequest { premise, hypotheses })?;
        if response.scores.len() != hypotheses.len() {
            return Err(BackendError::Malformed(format!(
                "{} scores for {} hypotheses",
                response.scores.len(),
                hypotheses.len()
            )));
        }
        response.scores.into_iter().enumerate().map(|(i, w)| to_score(w, i)).collect()
    }
}

impl EntailmentBackend for HttpEntailmentBackend {
    fn entail_batch(&self, premise: &str, hypotheses: &[String]) -> Result<Vec<EntailmentScore>, BackendError> {
        if hypotheses.is_empty() {
            return Ok(Vec::new());
        }
        let chunks: Vec<&[String]> = hypotheses.chunks(self.endpoint.config.max_batch).collect();
        if chunks.len() == 1 {
            return self.score_chunk(premise, chunks[0]);
        }
        let results: Mutex<Vec<Option<ChunkResult>>> = Mutex::new((0..chunks.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = self.endpoint.config.max_in_flight.min(chunks.len());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= chunks.len() {
                        break;
                    }
                    let r = self.score_chunk(premise, chunks[i]);
                    let failed = r.is_err();
                    results.lock().expect("results lock")[i] = Some(r);
                    if failed {
                        // Stop handing out work; other workers finish their chunk.
                        next.store(chunks.len(), Ordering::SeqCst);
                        break;
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(hypotheses.len());
        for r in results.into_inner().expect("results lock") {
            match r {
                Some(Ok(scores)) => out.extend(scores),
                Some(Err(e)) => return Err(e),
                None => {}
            }
        }
        if out.len() != hypotheses.len() {
            return Err(BackendError::Malformed("incomplete batch results".into()));
        }
        Ok(out)
    }
}

/// Client for a remote part-of-speech tagger. The tagger may retokenize;
/// offsets it returns are relative to the sentence text it was sent.
pub struct HttpTagger {
    endpoint: Endpoint,
}

impl HttpTagger {
    pub fn new(base_url: &str, config: ClientConfig) -> Result<Self, BackendError> {
        Ok(HttpTagger {
            endpoint: Endpoint::new(base_url, "/tag", config)?,
        })
    }

    pub fn request_count(&self) -> usize {
        self.endpoint.requests.load(Ordering::SeqCst)
    }
}

impl Tagger for HttpTagger {
    fn tag(&self, sentences: &[Sentence]) -> Result<Vec<Sentence>, BackendError> {
        let mut out = Vec::with_capacity(sentences.len());
        for chunk in sentences.chunks(self.endpoint.config.max_batch) {
            let request = TagRequest {
                sentences: chunk.iter().map(|s| s.text.as_str()).collect(),
            };
            let response: TagResponse = self.endpoint.post(&request)?;
            if response.sentences.len() != chunk.len() {
                return Err(BackendError::Malformed(format!(
                    "tagger returned {} sentences for {}",
                    response.sentences.len(),
                    chunk.len()
                )));
            }
            for (s, tagged) in chunk.iter().zip(response.sentences) {
                let tokens = tagged
                    .tokens
                    .into_iter()
                    .map(|t| {
                        let pos: Pos = t
                            .pos
                            .parse()
                            .map_err(|_| BackendError::Malformed(format!("unknown tag {:?}", t.pos)))?;
                        Ok(Token {
                            text: t.text,
                            char_start: t.start,
                            char_end: t.end,
                            pos: Some(pos),
                        })
                    })
                    .collect::<Result<Vec<_>, BackendError>>()?;
                out.push(Sentence {
                    index: s.index,
                    char_start: s.char_start,
                    text: s.text.clone(),
                    tokens,
                });
            }
        }
        Ok(out)
    }
}
