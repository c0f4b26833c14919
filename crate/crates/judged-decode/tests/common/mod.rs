//! A logits server stand-in built on `tiny_http`, serving an in-process
//! table model over the `/v1` protocol.
#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use judged_decode_core::{ProbabilitySource, TableModel, TokenId};
use serde_json::{json, Value};
use tiny_http::{Header, Method, Response, Server};

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Dense,
    /// Only the `k` most likely tokens per vector.
    Sparse(usize),
    /// Every logprobs call fails with this status.
    Status(u16),
    /// Dense vectors scaled so their mass is off by this much.
    Skewed(f64),
}

pub struct MockServer {
    pub url: String,
    pub logprob_calls: Arc<AtomicUsize>,
    pub mode: Arc<Mutex<Mode>>,
    server: Arc<Server>,
    handle: Option<JoinHandle<()>>,
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn reply(status: u16, body: Value) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body.to_string())
        .with_status_code(status)
        .with_header(Header::from_bytes("Content-Type", "application/json").unwrap())
}

/// Natural logs, with zero mapped to a huge negative number (JSON has no
/// infinity).
fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        -1e300
    }
}

pub fn serve(model: TableModel, mode: Mode) -> MockServer {
    let server = Arc::new(Server::http("127.0.0.1:0").unwrap());
    let port = server.server_addr().to_ip().unwrap().port();
    let calls = Arc::new(AtomicUsize::new(0));
    let mode = Arc::new(Mutex::new(mode));
    let (srv, counter, shared_mode) = (server.clone(), calls.clone(), mode.clone());
    let handle = thread::spawn(move || {
        for mut req in srv.incoming_requests() {
            let mut body = String::new();
            let _ = req.as_reader().read_to_string(&mut body);
            let parsed: Option<Value> = serde_json::from_str(&body).ok();
            let response = match (req.method(), req.url()) {
                (Method::Get, "/v1/model_info") => reply(
                    200,
                    json!({
                        "vocab_size": model.vocab_size(),
                        "eos_id": model.eos_token().map(|t| t.0),
                        "max_context": model.max_context(),
                        "name": "toy-table",
                    }),
                ),
                (Method::Post, "/v1/logprobs") => {
                    counter.fetch_add(1, Ordering::SeqCst);
                    logprobs(&model, parsed, &shared_mode.lock().unwrap())
                }
                (Method::Post, "/v1/tokenize") => match parsed.as_ref().and_then(|v| v["text"].as_str()) {
                    Some(text) => {
                        let tokens: Vec<u32> = model.tokenize(text).unwrap().into_iter().map(|t| t.0).collect();
                        reply(200, json!({ "tokens": tokens }))
                    }
                    None => reply(400, json!({"error": "missing text"})),
                },
                (Method::Post, "/v1/detokenize") => match parsed.as_ref().and_then(|v| v["tokens"].as_array()) {
                    Some(tokens) => {
                        let words: Vec<String> = tokens.iter().map(|t| format!("<{}>", t)).collect();
                        reply(200, json!({ "text": words.join("") }))
                    }
                    None => reply(400, json!({"error": "missing tokens"})),
                },
                _ => reply(404, json!({"error": "not found"})),
            };
            let _ = req.respond(response);
        }
    });
    MockServer { url: format!("http://127.0.0.1:{port}"), logprob_calls: calls, mode, server, handle: Some(handle) }
}

fn logprobs(model: &TableModel, body: Option<Value>, mode: &Mode) -> Response<std::io::Cursor<Vec<u8>>> {
    if let Mode::Status(code) = mode {
        return reply(*code, json!({"error": "forced"}));
    }
    let Some(contexts) = body.as_ref().and_then(|b| b["contexts"].as_array()) else {
        return reply(400, json!({"error": "malformed"}));
    };
    if contexts.len() > 64 {
        return reply(413, json!({"error": "batch too large"}));
    }
    let mut results = Vec::new();
    for ctx in contexts {
        let Some(ids) = ctx.as_array() else {
            return reply(400, json!({"error": "malformed context"}));
        };
        if ids.len() > model.max_context() {
            return reply(422, json!({"error": "context too long"}));
        }
        let ctx: Vec<TokenId> = ids.iter().map(|v| TokenId(v.as_u64().unwrap() as u32)).collect();
        let probs = model.next_distribution(&ctx).unwrap().into_probs();
        results.push(match mode {
            Mode::Dense => json!({ "dense": probs.iter().map(|&p| ln(p)).collect::<Vec<_>>() }),
            Mode::Skewed(by) => json!({ "dense": probs.iter().map(|&p| ln(p * (1.0 + by))).collect::<Vec<_>>() }),
            Mode::Sparse(k) => {
                let mut order: Vec<usize> = (0..probs.len()).collect();
                order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
                order.truncate(*k);
                json!({ "sparse": {
                    "ids": order.iter().map(|&i| i as u32).collect::<Vec<_>>(),
                    "logprobs": order.iter().map(|&i| ln(probs[i])).collect::<Vec<_>>(),
                }})
            }
            Mode::Status(_) => unreachable!(),
        });
    }
    reply(200, json!({ "results": results }))
}

/// A depth-1 table over four tokens with a lexicon for the default
/// preference words.
pub fn toy_table() -> TableModel {
    use judged_decode_core::Distribution;
    let mut m = TableModel::new(1, Distribution::new(vec![0.25, 0.25, 0.25, 0.25]).unwrap());
    let rows =
        [[0.5, 0.25, 0.125, 0.125], [0.125, 0.5, 0.25, 0.125], [0.125, 0.125, 0.5, 0.25], [0.25, 0.125, 0.125, 0.5]];
    for (t, row) in rows.iter().enumerate() {
        m.insert(vec![TokenId(t as u32)], Distribution::new(row.to_vec()).unwrap()).unwrap();
    }
    let lexicon = [("harmless", 0u32), ("helpful", 1)].into_iter().map(|(w, t)| (w.to_string(), TokenId(t))).collect();
    m.with_lexicon(lexicon).unwrap().with_max_context(64)
}
