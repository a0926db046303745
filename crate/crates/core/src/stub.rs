//! A local OpenAI-compatible endpoint with scripted answers, for tests and
//! dry runs.
//!
//! Routes (under any prefix, conventionally `/v1`):
//!
//! * `POST .../completions` and `POST .../chat/completions`: answer per
//!   [`StubMode`]; NER questions (`What describes <type> in the text?`) are
//!   answered with the local extractor's entities as a JSON list.
//! * `POST .../embeddings`: `{"input": code}` → `{"embedding": [...]}`, a
//!   deterministic hashed bag of tokens.
//! * `GET /stats`: request counters.
//!
//! Faults can be injected: fail the first N POSTs, or every POST whose body
//! contains a given substring.

use std::io;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Language, Split};
use crate::entity::{EntityExtractor, EntityType, LocalLexical};

const WORKERS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubMode {
    /// Always answer with this text.
    Fixed(String),
    /// Answer with the prompt itself.
    EchoPrompt,
    /// Answer with the explanation of the known snippet that ends latest in
    /// the prompt (the query, for every template), longest on ties.
    EchoReference,
    /// Answer with the explanation of the last known demonstration in the
    /// prompt, i.e. the most similar one.
    NearestDemo,
}

#[derive(Debug, Clone)]
pub struct StubConfig {
    pub mode: StubMode,
    /// (code, explanation) pairs consulted by the echo modes.
    pub pairs: Vec<(String, String)>,
    pub fail_first: usize,
    pub fail_when_contains: Vec<String>,
    pub fail_status: u16,
    pub embedding_dim: usize,
    pub ner_language: Language,
}

impl StubConfig {
    pub fn new(mode: StubMode) -> Self {
        StubConfig {
            mode,
            pairs: Vec::new(),
            fail_first: 0,
            fail_when_contains: Vec::new(),
            fail_status: 500,
            embedding_dim: 32,
            ner_language: Language::Python,
        }
    }

    pub fn fixed(text: impl Into<String>) -> Self {
        Self::new(StubMode::Fixed(text.into()))
    }

    /// Echoes references of the test split of `corpus`.
    pub fn echo_reference(corpus: &Corpus) -> Self {
        let mut c = Self::new(StubMode::EchoReference).with_pairs(corpus, Split::Test);
        c.ner_language = corpus.language();
        c
    }

    /// Copies the explanation of the most similar train demonstration.
    pub fn nearest_demo(corpus: &Corpus) -> Self {
        let mut c = Self::new(StubMode::NearestDemo).with_pairs(corpus, Split::Train);
        c.ner_language = corpus.language();
        c
    }

    fn with_pairs(mut self, corpus: &Corpus, split: Split) -> Self {
        self.pairs = corpus
            .split(split)
            .map(|s| (s.code.clone(), s.explanation.clone()))
            .collect();
        self
    }
}

#[derive(Debug, Default)]
struct Counters {
    posts: AtomicUsize,
    generations: AtomicUsize,
    embeddings: AtomicUsize,
    failures: AtomicUsize,
}

pub struct StubServer {
    server: Arc<tiny_http::Server>,
    workers: Vec<JoinHandle<()>>,
    counters: Arc<Counters>,
    port: u16,
}

impl StubServer {
    /// Binds 127.0.0.1 on an ephemeral port.
    pub fn start(config: StubConfig) -> io::Result<Self> {
        Self::bind("127.0.0.1:0", config)
    }

    pub fn bind(addr: &str, config: StubConfig) -> io::Result<Self> {
        let server = tiny_http::Server::http(addr).map_err(io::Error::other)?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| io::Error::other("stub server has no IP address"))?;
        let server = Arc::new(server);
        let counters = Arc::new(Counters::default());
        let config = Arc::new(config);
        let workers = (0..WORKERS)
            .map(|_| {
                let (server, counters, config) = (server.clone(), counters.clone(), config.clone());
                std::thread::spawn(move || {
                    while let Ok(request) = server.recv() {
                        if let Err(e) = handle(request, &config, &counters) {
                            log::warn!("stub: {e}");
                        }
                    }
                })
            })
            .collect();
        Ok(StubServer {
            server,
            workers,
            counters,
            port,
        })
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    /// Base URL to use as a model endpoint, e.g. `http://127.0.0.1:PORT/v1`.
    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}/v1", self.port)
    }

    /// POST requests received, failed ones included.
    pub fn requests(&self) -> usize {
        self.counters.posts.load(Ordering::SeqCst)
    }

    /// Successful completion and chat answers.
    pub fn generations(&self) -> usize {
        self.counters.generations.load(Ordering::SeqCst)
    }

    pub fn embeddings(&self) -> usize {
        self.counters.embeddings.load(Ordering::SeqCst)
    }

    pub fn failures(&self) -> usize {
        self.counters.failures.load(Ordering::SeqCst)
    }

    /// Blocks until the server is stopped from elsewhere (i.e. forever, for
    /// the CLI).
    pub fn wait(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn respond(request: tiny_http::Request, status: u16, body: &Value) -> io::Result<()> {
    let header = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
    request.respond(
        tiny_http::Response::from_string(body.to_string())
            .with_status_code(status)
            .with_header(header),
    )
}

fn handle(mut request: tiny_http::Request, config: &StubConfig, counters: &Counters) -> io::Result<()> {
    let path = request.url().split('?').next().unwrap_or("").to_string();
    if *request.method() == tiny_http::Method::Get && path.ends_with("/stats") {
        let body = json!({
            "requests": counters.posts.load(Ordering::SeqCst),
            "generations": counters.generations.load(Ordering::SeqCst),
            "embeddings": counters.embeddings.load(Ordering::SeqCst),
            "failures": counters.failures.load(Ordering::SeqCst),
        });
        return respond(request, 200, &body);
    }
    if *request.method() != tiny_http::Method::Post {
        return respond(request, 405, &json!({"error": "method not allowed"}));
    }
    let index = counters.posts.fetch_add(1, Ordering::SeqCst);
    let mut raw = String::new();
    request.as_reader().read_to_string(&mut raw)?;
    if index < config.fail_first || config.fail_when_contains.iter().any(|s| raw.contains(s.as_str())) {
        counters.failures.fetch_add(1, Ordering::SeqCst);
        return respond(request, config.fail_status, &json!({"error": "injected failure"}));
    }
    let body: Value = match serde_json::from_str(&raw) {
        Ok(v) => v,
        Err(e) => return respond(request, 400, &json!({"error": e.to_string()})),
    };

    if path.ends_with("/embeddings") {
        let Some(input) = body["input"].as_str() else {
            return respond(request, 400, &json!({"error": "missing input"}));
        };
        counters.embeddings.fetch_add(1, Ordering::SeqCst);
        return respond(request, 200, &json!({ "embedding": hashed_embedding(input, config.embedding_dim) }));
    }

    let chat = path.ends_with("/chat/completions");
    if !chat && !path.ends_with("/completions") {
        return respond(request, 404, &json!({"error": format!("no route {path}")}));
    }
    let text = if chat {
        body["messages"]
            .as_array()
            .map(|ms| {
                ms.iter()
                    .filter_map(|m| m["content"].as_str())
                    .collect::<Vec<_>>()
                    .join("\n")
            })
            .unwrap_or_default()
    } else {
        body["prompt"].as_str().unwrap_or_default().to_string()
    };
    let answer = answer_ner(&text, config.ner_language).unwrap_or_else(|| answer(&text, config));
    counters.generations.fetch_add(1, Ordering::SeqCst);
    let reply = if chat {
        json!({"object": "chat.completion", "choices": [{"index": 0, "message": {"role": "assistant", "content": answer}, "finish_reason": "stop"}]})
    } else {
        json!({"object": "text_completion", "choices": [{"index": 0, "text": answer, "finish_reason": "stop"}]})
    };
    respond(request, 200, &reply)
}

fn answer(prompt: &str, config: &StubConfig) -> String {
    match &config.mode {
        StubMode::Fixed(text) => text.clone(),
        StubMode::EchoPrompt => prompt.to_string(),
        StubMode::EchoReference | StubMode::NearestDemo => config
            .pairs
            .iter()
            .filter_map(|(code, expl)| prompt.rfind(code.as_str()).map(|i| (i + code.len(), code.len(), expl)))
            .max_by_key(|&(end, len, _)| (end, len))
            .map(|(_, _, expl)| expl.clone())
            .unwrap_or_default(),
    }
}

/// Answers `Text: <code>` ... `What describes <type> in the text?`
/// conversations with a JSON list.
fn answer_ner(text: &str, language: Language) -> Option<String> {
    let q = text.rfind("What describes ")?;
    let rest = &text[q + "What describes ".len()..];
    let ty: EntityType = rest[..rest.find(" in the text?")?].parse().ok()?;
    let start = text.find("Text: ")? + "Text: ".len();
    let end = text[start..].find("I've read this text.").map_or(q, |i| start + i);
    let code = text[start..end]
        .trim_end()
        .trim_end_matches("ASSISTANT:")
        .trim_end();
    let entities = LocalLexical::new().extract(code, language).ok()?;
    Some(json!(entities.get(ty).iter().collect::<Vec<_>>()).to_string())
}

/// Token counts hashed into `dim` buckets; never all zero.
pub fn hashed_embedding(text: &str, dim: usize) -> Vec<f32> {
    let dim = dim.max(1);
    let mut v = vec![0f32; dim];
    for tok in text
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
    {
        let h = Sha256::digest(tok.to_lowercase().as_bytes());
        let bucket = u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) as usize % dim;
        v[bucket] += 1.0;
    }
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_reference_prefers_latest_then_longest() {
        let mut c = StubConfig::new(StubMode::EchoReference);
        c.pairs = vec![
            ("f(x)".into(), "short".into()),
            ("g(f(x))".into(), "long".into()),
            ("h()".into(), "demo".into()),
        ];
        assert_eq!(answer("Code: h()\nCode: g(f(x))\nSummary:", &c), "long");
        assert_eq!(answer("Code: g(f(x))\nCode: h()", &c), "demo");
        assert_eq!(answer("nothing known", &c), "");
    }

    #[test]
    fn ner_questions() {
        let chat = "Text: print(os.listdir(dname))\nI've read this text.\nWhat describes library in the text?";
        assert_eq!(answer_ner(chat, Language::Python).unwrap(), r#"["os"]"#);
        let completion = "A virtual assistant answers questions from a user based on the provided text.\n\
                          USER: Text: print(os.listdir(dname))\nASSISTANT: I've read this text.\n\
                          USER: What describes function in the text?\nASSISTANT:";
        assert_eq!(answer_ner(completion, Language::Python).unwrap(), r#"["listdir","print"]"#);
        assert!(answer_ner("Summarize this", Language::Python).is_none());
    }

    #[test]
    fn embeddings_are_deterministic_and_non_zero() {
        assert_eq!(hashed_embedding("os.mkdir(p)", 8), hashed_embedding("os.mkdir(p)", 8));
        assert_eq!(hashed_embedding("", 4), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(hashed_embedding("a b c", 16).iter().sum::<f32>(), 3.0);
    }
}
