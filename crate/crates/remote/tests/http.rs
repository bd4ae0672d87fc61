use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use zsie_core::schema::load_schema;
use zsie_core::text::{pos_tag_all, segment_and_tokenize};
use zsie_core::{run_e2e, Backends, BackendError, EntailmentBackend, RunConfig};
use zsie_remote::{ClientConfig, HttpEntailmentBackend, HttpTagger};

#[derive(Default)]
struct Stats {
    hits: AtomicUsize,
    largest_batch: AtomicUsize,
}

/// Entailment for "h<i>" is (i mod 10) / 10; "... is a person" scores 0.9.
fn entail_of(h: &str) -> f64 {
    if h.ends_with("is a person") {
        return 0.9;
    }
    h.trim_start_matches('h').parse::<usize>().map(|i| (i % 10) as f64 / 10.0).unwrap_or(0.0)
}

async fn entail(State(stats): State<Arc<Stats>>, Json(body): Json<Value>) -> Result<Json<Value>, StatusCode> {
    stats.hits.fetch_add(1, Ordering::SeqCst);
    let hyps = body["hypotheses"].as_array().ok_or(StatusCode::BAD_REQUEST)?;
    body["premise"].as_str().ok_or(StatusCode::BAD_REQUEST)?;
    stats.largest_batch.fetch_max(hyps.len(), Ordering::SeqCst);
    let scores: Vec<Value> = hyps
        .iter()
        .map(|h| {
            let e = entail_of(h.as_str().unwrap_or(""));
            json!({"entail": e, "neutral": 1.0 - e, "contradict": 0.0})
        })
        .collect();
    Ok(Json(json!({ "scores": scores })))
}

async fn flaky(State(stats): State<Arc<Stats>>, body: Json<Value>) -> Result<Json<Value>, StatusCode> {
    if stats.hits.fetch_add(1, Ordering::SeqCst) < 2 {
        return Err(StatusCode::SERVICE_UNAVAILABLE);
    }
    stats.hits.fetch_sub(1, Ordering::SeqCst);
    entail(State(stats), body).await
}

async fn always_503() -> StatusCode {
    StatusCode::SERVICE_UNAVAILABLE
}

async fn bad_request() -> StatusCode {
    StatusCode::BAD_REQUEST
}

async fn off_simplex() -> Json<Value> {
    Json(json!({"scores": [{"entail": 0.5, "neutral": 0.2, "contradict": 0.0}]}))
}

async fn near_simplex() -> Json<Value> {
    Json(json!({"scores": [{"entail": 0.5, "neutral": 0.5004, "contradict": 0.0}]}))
}

async fn short() -> Json<Value> {
    Json(json!({"scores": []}))
}

/// Whitespace tokenizer tagging capitalized words PROPN, "died" VERB,
/// punctuation PUNCT and everything else NOUN.
async fn tag(Json(body): Json<Value>) -> Result<Json<Value>, StatusCode> {
    let sentences = body["sentences"].as_array().ok_or(StatusCode::BAD_REQUEST)?;
    let out: Vec<Value> = sentences
        .iter()
        .map(|s| {
            let text = s.as_str().unwrap_or("");
            let mut tokens = Vec::new();
            let mut start = None;
            let chars: Vec<char> = text.chars().collect();
            for i in 0..=chars.len() {
                let boundary = i == chars.len() || chars[i].is_whitespace();
                match (start, boundary) {
                    (None, false) => start = Some(i),
                    (Some(s), true) => {
                        let word: String = chars[s..i].iter().collect();
                        let pos = if word == "died" {
                            "VERB"
                        } else if word.chars().all(|c| c.is_ascii_punctuation()) {
                            "PUNCT"
                        } else if word.chars().next().unwrap().is_uppercase() {
                            "PROPN"
                        } else {
                            "NOUN"
                        };
                        tokens.push(json!({"text": word, "start": s, "end": i, "pos": pos}));
                        start = None;
                    }
                    _ => {}
                }
            }
            json!({ "tokens": tokens })
        })
        .collect();
    Ok(Json(json!({ "sentences": out })))
}

async fn bad_tag() -> Json<Value> {
    Json(json!({"sentences": [{"tokens": [{"text": "x", "start": 0, "end": 1, "pos": "NN"}]}]}))
}

fn serve(stats: Arc<Stats>) -> SocketAddr {
    let app = Router::new()
        .route("/entail", post(entail))
        .route("/tag", post(tag))
        .route("/flaky/entail", post(flaky))
        .route("/down/entail", post(always_503))
        .route("/reject/entail", post(bad_request))
        .route("/off/entail", post(off_simplex))
        .route("/near/entail", post(near_simplex))
        .route("/short/entail", post(short))
        .route("/badtag/tag", post(bad_tag))
        .with_state(stats);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn config(max_batch: usize) -> ClientConfig {
    ClientConfig {
        max_batch,
        initial_backoff: Duration::from_millis(5),
        ..ClientConfig::default()
    }
}

fn hyps(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("h{i}")).collect()
}

#[test]
fn batches_preserve_order_and_count() {
    let stats = Arc::new(Stats::default());
    let addr = serve(stats.clone());
    for (n, max_batch) in [(70, 32), (64, 32), (1, 32), (10, 3), (5, 1)] {
        let backend = HttpEntailmentBackend::new(&format!("http://{addr}"), config(max_batch)).unwrap();
        let out = backend.entail_batch("premise", &hyps(n)).unwrap();
        assert_eq!(out.len(), n);
        for (i, s) in out.iter().enumerate() {
            assert_eq!(s.entail, (i % 10) as f64 / 10.0);
        }
        assert_eq!(backend.request_count(), n.div_ceil(max_batch));
    }
    assert!(stats.largest_batch.load(Ordering::SeqCst) <= 32);
}

#[test]
fn empty_batch_sends_nothing() {
    let addr = serve(Arc::new(Stats::default()));
    let backend = HttpEntailmentBackend::new(&format!("http://{addr}"), config(4)).unwrap();
    assert!(backend.entail_batch("p", &[]).unwrap().is_empty());
    assert_eq!(backend.request_count(), 0);
}

#[test]
fn retries_transient_failures() {
    let addr = serve(Arc::new(Stats::default()));
    let backend = HttpEntailmentBackend::new(&format!("http://{addr}/flaky"), config(32)).unwrap();
    let out = backend.entail_batch("p", &hyps(3)).unwrap();
    assert_eq!(out.len(), 3);
    assert_eq!(backend.request_count(), 3);
}

#[test]
fn gives_up_after_three_attempts() {
    let addr = serve(Arc::new(Stats::default()));
    let backend = HttpEntailmentBackend::new(&format!("http://{addr}/down"), config(32)).unwrap();
    let err = backend.entail_batch("p", &hyps(2)).unwrap_err();
    assert!(err.is_retryable());
    assert_eq!(backend.request_count(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let addr = serve(Arc::new(Stats::default()));
    let backend = HttpEntailmentBackend::new(&format!("http://{addr}/reject"), config(32)).unwrap();
    let err = backend.entail_batch("p", &hyps(2)).unwrap_err();
    assert!(!err.is_retryable());
    assert_eq!(backend.request_count(), 1);
}

#[test]
fn unreachable_service_is_retryable_transport_error() {
    // Bind then drop to get a port nobody listens on.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = HttpEntailmentBackend::new(&format!("http://127.0.0.1:{port}"), config(32)).unwrap();
    match backend.entail_batch("p", &hyps(1)) {
        Err(BackendError::Transport { retryable: true, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(backend.request_count(), 3);
}

#[test]
fn malformed_responses() {
    let addr = serve(Arc::new(Stats::default()));
    for path in ["off", "short"] {
        let backend = HttpEntailmentBackend::new(&format!("http://{addr}/{path}"), config(32)).unwrap();
        assert!(matches!(backend.entail_batch("p", &hyps(1)), Err(BackendError::Malformed(_))), "{path}");
        assert_eq!(backend.request_count(), 1);
    }
    let backend = HttpEntailmentBackend::new(&format!("http://{addr}/near"), config(32)).unwrap();
    let s = backend.entail_batch("p", &hyps(1)).unwrap()[0];
    assert!((s.entail + s.neutral + s.contradict - 1.0).abs() < 1e-9);
}

#[test]
fn tagger_round_trip() {
    let addr = serve(Arc::new(Stats::default()));
    let tagger = HttpTagger::new(&format!("http://{addr}"), config(2)).unwrap();
    let sentences = segment_and_tokenize("John Smith died . Mary left . Bob Lee died .");
    let tagged = pos_tag_all(&sentences, &tagger).unwrap();
    assert_eq!(tagged.len(), 3);
    assert_eq!(tagger.request_count(), 2);
    let tags: Vec<&str> = tagged[0].tokens.iter().map(|t| t.pos.unwrap().as_str()).collect();
    assert_eq!(tags, ["PROPN", "PROPN", "VERB", "PUNCT"]);

    let bad = HttpTagger::new(&format!("http://{addr}/badtag"), config(2)).unwrap();
    let one = segment_and_tokenize("x");
    assert!(matches!(pos_tag_all(&one, &bad), Err(BackendError::Malformed(_))));
}

#[test]
fn pipeline_over_remote_services() {
    let addr = serve(Arc::new(Stats::default()));
    let url = format!("http://{addr}");
    let backends = Backends::new(
        Arc::new(HttpEntailmentBackend::new(&url, config(8)).unwrap()),
        Arc::new(HttpTagger::new(&url, config(8)).unwrap()),
    );
    let schema =
        load_schema(br#"{"entity_types": [{"name": "PERSON", "templates": [{"text": "{X} is a person"}]}]}"#).unwrap();
    let doc = run_e2e("John Smith died .", &schema, &RunConfig::default(), &backends).unwrap();
    assert_eq!(doc.entities.len(), 1);
    assert_eq!(doc.entities[0].score, 0.9);
}
