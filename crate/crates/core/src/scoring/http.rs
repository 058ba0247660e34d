//! Client for the inference sidecar (`POST /v1/entailment`).

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{BackendError, EntailmentBackend, Logits, ScoreError};

/// Largest batch the service accepts.
pub const MAX_BATCH: usize = 256;

/// Semantic slot order every response must declare.
pub const LABEL_ORDER: [&str; 3] = ["entailment", "neutral", "contradiction"];

#[derive(Serialize)]
struct PairDoc<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    model_id: &'a str,
    pairs: Vec<PairDoc<'a>>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    model_id: String,
    logits: Vec<Vec<f64>>,
    label_order: Vec<String>,
}

pub struct HttpBackend {
    client: Client,
    url: String,
    retries: usize,
    backoff: Duration,
}

impl HttpBackend {
    pub fn new(endpoint: &str, timeout: Duration, retries: usize, backoff: Duration) -> Result<Self, ScoreError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ScoreError::Config(format!("http client: {e}")))?;
        Ok(HttpBackend {
            client,
            url: format!("{}/v1/entailment", endpoint.trim_end_matches('/')),
            retries,
            backoff,
        })
    }

    fn attempt(&self, model_id: &str, pairs: &[(&str, &str)]) -> Result<Vec<Logits>, Attempt> {
        let body = ScoreRequest {
            model_id,
            pairs: pairs
                .iter()
                .map(|(premise, hypothesis)| PairDoc { premise, hypothesis })
                .collect(),
        };
        let resp = self
            .client
            .post(&self.url)
            .json(&body)
            .send()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
            let text = resp.text().unwrap_or_default();
            return Err(Attempt::Retry(format!("{status}: {}", text.trim())));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(Attempt::Fatal(BackendError::Protocol(format!(
                "{} answered {status}: {}",
                self.url,
                text.trim()
            ))));
        }
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        let doc: ScoreResponse = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fatal(BackendError::Protocol(format!("malformed response: {e}"))))?;
        decode(doc, model_id, pairs.len()).map_err(Attempt::Fatal)
    }
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

fn decode(doc: ScoreResponse, model_id: &str, expected: usize) -> Result<Vec<Logits>, BackendError> {
    if doc.label_order != LABEL_ORDER {
        return Err(BackendError::Protocol(format!(
            "unexpected label_order {:?}",
            doc.label_order
        )));
    }
    if doc.model_id != model_id {
        return Err(BackendError::Protocol(format!(
            "service answered for model {:?}, asked for {:?}",
            doc.model_id, model_id
        )));
    }
    if doc.logits.len() != expected {
        return Err(BackendError::Protocol(format!(
            "expected {expected} logit rows, got {}",
            doc.logits.len()
        )));
    }
    doc.logits
        .into_iter()
        .map(|row| match row.as_slice() {
            &[e, n, c] if e.is_finite() && n.is_finite() && c.is_finite() => Ok(Logits::new(e, n, c)),
            _ => Err(BackendError::Protocol(format!("bad logit row {row:?}"))),
        })
        .collect()
}

impl EntailmentBackend for HttpBackend {
    fn score_batch(&self, model_id: &str, pairs: &[(&str, &str)]) -> Result<Vec<Logits>, BackendError> {
        let mut delay = self.backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(model_id, pairs) {
                Ok(logits) => return Ok(logits),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(message)) => {
                    if attempts > self.retries {
                        return Err(BackendError::Transport { attempts, message });
                    }
                    log::warn!("{}: attempt {attempts} failed ({message}); retrying", self.url);
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;

    /// Serves canned HTTP responses, one per connection, in order.
    fn serve(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                counter.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut req = vec![0; len];
                reader.read_exact(&mut req).unwrap();
                bodies.push(String::from_utf8(req).unwrap());
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (addr, hits, handle)
    }

    fn ok_body(rows: &str) -> String {
        format!(
            r#"{{"model_id":"facebook/bart-large-mnli","logits":{rows},"label_order":["entailment","neutral","contradiction"]}}"#
        )
    }

    fn backend(addr: &str, retries: usize) -> HttpBackend {
        HttpBackend::new(addr, Duration::from_secs(5), retries, Duration::from_millis(1)).unwrap()
    }

    #[test]
    fn posts_pairs_and_decodes_logits() {
        let (addr, _, handle) = serve(vec![(200, ok_body("[[2.5,0.1,-1.0],[0.0,1.0,2.0]]"))]);
        let logits = backend(&addr, 0)
            .score_batch("facebook/bart-large-mnli", &[("p1", "h1"), ("p2", "h2")])
            .unwrap();
        assert_eq!(logits, [Logits::new(2.5, 0.1, -1.0), Logits::new(0.0, 1.0, 2.0)]);
        let bodies = handle.join().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
        assert_eq!(sent["model_id"], "facebook/bart-large-mnli");
        assert_eq!(sent["pairs"][1]["premise"], "p2");
        assert_eq!(sent["pairs"][1]["hypothesis"], "h2");
    }

    #[test]
    fn retries_server_errors() {
        let (addr, hits, handle) = serve(vec![
            (503, r#"{"detail":"loading"}"#.into()),
            (500, "{}".into()),
            (200, ok_body("[[1,2,3]]")),
        ]);
        let logits = backend(&addr, 3)
            .score_batch("facebook/bart-large-mnli", &[("p", "h")])
            .unwrap();
        assert_eq!(logits, [Logits::new(1.0, 2.0, 3.0)]);
        handle.join().unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_retries() {
        let (addr, _, handle) = serve(vec![(503, "{}".into()), (503, "{}".into())]);
        let err = backend(&addr, 1)
            .score_batch("facebook/bart-large-mnli", &[("p", "h")])
            .unwrap_err();
        assert!(matches!(err, BackendError::Transport { attempts: 2, .. }));
        handle.join().unwrap();
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (addr, hits, handle) = serve(vec![(413, r#"{"detail":"too many pairs"}"#.into())]);
        let err = backend(&addr, 3)
            .score_batch("facebook/bart-large-mnli", &[("p", "h")])
            .unwrap_err();
        assert!(matches!(err, BackendError::Protocol(_)));
        handle.join().unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn malformed_responses_are_protocol_errors() {
        let bad_order = r#"{"model_id":"facebook/bart-large-mnli","logits":[[1,2,3]],"label_order":["contradiction","neutral","entailment"]}"#;
        for body in [
            "not json".to_string(),
            bad_order.to_string(),
            ok_body("[[1,2]]"),
            ok_body("[[1,2,3],[4,5,6]]"),
        ] {
            let (addr, _, handle) = serve(vec![(200, body.clone())]);
            let err = backend(&addr, 0)
                .score_batch("facebook/bart-large-mnli", &[("p", "h")])
                .unwrap_err();
            assert!(matches!(err, BackendError::Protocol(_)), "{body}");
            handle.join().unwrap();
        }
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let err = backend(&format!("http://127.0.0.1:{port}"), 1)
            .score_batch("m", &[("p", "h")])
            .unwrap_err();
        assert!(matches!(err, BackendError::Transport { attempts: 2, .. }));
    }
}
