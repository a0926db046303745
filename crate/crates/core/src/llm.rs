//! Client for OpenAI-compatible generation endpoints.
//!
//! Requests are retried on 5xx, 429, timeouts and transport failures with
//! exponential backoff; other 4xx responses fail immediately. Greedy
//! generations can be cached on disk, keyed by request content, model and
//! parameters.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::cache::{read_jsonl, sha256_hex, AppendLog};
use crate::prompting::TemplateFamily;

/// Environment variable holding the bearer token sent to endpoints.
pub const API_KEY_VAR: &str = "SELSHOT_API_KEY";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("endpoint returned HTTP {status}: {body}")]
    EndpointError { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("rate limited by endpoint")]
    RateLimited,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("generation cache {path}: {reason}")]
    Cache { path: String, reason: String },
}

impl GatewayError {
    pub fn is_upstream(&self) -> bool {
        !matches!(self, GatewayError::InvalidParams(_) | GatewayError::Cache { .. })
    }

    /// HTTP status if the endpoint answered at all.
    pub fn status(&self) -> Option<u16> {
        match self {
            GatewayError::EndpointError { status, .. } => Some(*status),
            GatewayError::RateLimited => Some(429),
            _ => None,
        }
    }

    fn retryable(&self) -> bool {
        match self {
            GatewayError::EndpointError { status, .. } => *status >= 500 || *status == 408,
            GatewayError::RateLimited | GatewayError::Timeout | GatewayError::Transport(_) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Greedy,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_new_tokens: u32,
    pub sampling: Sampling,
    /// Only sent when sampling; greedy requests carry temperature 0.
    pub temperature: f64,
}

impl GenerationParams {
    /// Settings for explanation generation.
    pub fn code_llm() -> Self {
        GenerationParams {
            max_new_tokens: 32,
            sampling: Sampling::Greedy,
            temperature: 0.7,
        }
    }

    /// Settings for entity extraction.
    pub fn ner() -> Self {
        GenerationParams {
            max_new_tokens: 64,
            sampling: Sampling::Greedy,
            temperature: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_new_tokens == 0 {
            return Err(GatewayError::InvalidParams("max_new_tokens must be positive".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(GatewayError::InvalidParams(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn wire_temperature(&self) -> f64 {
        match self.sampling {
            Sampling::Greedy => 0.0,
            Sampling::Sample => self.temperature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiStyle {
    /// `POST {endpoint}/completions` with a `prompt` string.
    Completion,
    /// `POST {endpoint}/chat/completions` with `messages`.
    Chat,
}

impl FromStr for ApiStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "completion" => Ok(ApiStyle::Completion),
            "chat" => Ok(ApiStyle::Chat),
            other => Err(format!("unknown api style `{other}`")),
        }
    }
}

impl fmt::Display for ApiStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApiStyle::Completion => "completion",
            ApiStyle::Chat => "chat",
        })
    }
}

/// A model served at an endpoint, with the prompt family it expects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelTarget {
    pub name: String,
    /// Base URL, e.g. `http://localhost:8000/v1`.
    pub endpoint: String,
    pub family: TemplateFamily,
    pub api: ApiStyle,
}

impl ModelTarget {
    /// Completion-style target for a model whose template family is known
    /// from its name.
    pub fn known(name: &str, endpoint: &str) -> Option<Self> {
        TemplateFamily::for_model(name).map(|family| ModelTarget {
            name: name.to_string(),
            endpoint: endpoint.to_string(),
            family,
            api: ApiStyle::Completion,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    model: String,
    text: String,
}

#[derive(Debug)]
struct GenerationCache {
    log: AppendLog,
    entries: RwLock<HashMap<String, String>>,
}

pub struct Gateway {
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
    api_key: Option<String>,
    cache: Option<GenerationCache>,
    attempts: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("retry", &self.retry)
            .field("cache", &self.cache.as_ref().map(|c| c.log.path()))
            .finish_non_exhaustive()
    }
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new()
    }
}

impl Gateway {
    /// 60 s request timeout, default retry policy, API key from
    /// [`API_KEY_VAR`] if set.
    pub fn new() -> Self {
        Self::with_timeout(Duration::from_secs(60))
    }

    pub fn with_timeout(timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("building the HTTP client");
        Gateway {
            client,
            retry: RetryPolicy::default(),
            api_key: std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()),
            cache: None,
            attempts: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    pub fn retry_policy(mut self, policy: RetryPolicy) -> Self {
        self.retry = policy;
        self
    }

    pub fn api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    /// Enables the append-only generation cache at `path`.
    pub fn cache_file(mut self, path: &Path) -> Result<Self, GatewayError> {
        let cache_err = |e: std::io::Error| GatewayError::Cache {
            path: path.display().to_string(),
            reason: e.to_string(),
        };
        let records: Vec<CacheRecord> = read_jsonl(path, true).map_err(cache_err)?;
        let entries = records.into_iter().map(|r| (r.key, r.text)).collect();
        self.cache = Some(GenerationCache {
            log: AppendLog::open(path).map_err(cache_err)?,
            entries: RwLock::new(entries),
        });
        Ok(self)
    }

    /// HTTP attempts made so far, retries included.
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::SeqCst)
    }

    /// Sends `prompt` as a completion, or as a single user message for chat
    /// targets, and returns the raw generated text.
    pub fn generate(&self, prompt: &str, model: &ModelTarget, params: &GenerationParams) -> Result<String, GatewayError> {
        match model.api {
            ApiStyle::Completion => self.request(model, params, json!({ "prompt": prompt })),
            ApiStyle::Chat => self.chat(&[ChatMessage::user(prompt)], model, params),
        }
    }

    pub fn chat(&self, messages: &[ChatMessage], model: &ModelTarget, params: &GenerationParams) -> Result<String, GatewayError> {
        self.request(model, params, json!({ "messages": messages }))
    }

    fn request(&self, model: &ModelTarget, params: &GenerationParams, content: Value) -> Result<String, GatewayError> {
        params.validate()?;
        let chat = content.get("messages").is_some();
        let cacheable = params.sampling == Sampling::Greedy;
        let key = sha256_hex(
            &json!({
                "model": model.name,
                "content": content,
                "max_new_tokens": params.max_new_tokens,
                "sampling": params.sampling,
                "temperature": params.wire_temperature(),
            })
            .to_string(),
        );
        if cacheable {
            if let Some(cache) = &self.cache {
                let hit = cache.entries.read().unwrap_or_else(|e| e.into_inner()).get(&key).cloned();
                if let Some(text) = hit {
                    self.cache_hits.fetch_add(1, Ordering::SeqCst);
                    return Ok(text);
                }
            }
        }

        let mut body = content;
        body["model"] = json!(model.name);
        body["max_tokens"] = json!(params.max_new_tokens);
        body["temperature"] = json!(params.wire_temperature());
        let url = format!(
            "{}/{}",
            model.endpoint.trim_end_matches('/'),
            if chat { "chat/completions" } else { "completions" }
        );
        let response = self.post_json(&url, &body)?;
        let text = extract_text(&response, chat)?;

        if cacheable {
            if let Some(cache) = &self.cache {
                let record = CacheRecord {
                    key: key.clone(),
                    model: model.name.clone(),
                    text: text.clone(),
                };
                cache.log.append(&record).map_err(|e| GatewayError::Cache {
                    path: cache.log.path().display().to_string(),
                    reason: e.to_string(),
                })?;
                cache.entries.write().unwrap_or_else(|e| e.into_inner()).insert(key, text.clone());
            }
        }
        Ok(text)
    }

    /// POSTs `body` with the retry policy and returns the parsed JSON reply.
    pub fn post_json(&self, url: &str, body: &Value) -> Result<Value, GatewayError> {
        let attempts = self.retry.attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.retry.base_delay * 2u32.pow(attempt - 1);
                log::debug!("retrying {url} in {delay:?}");
                thread::sleep(delay);
            }
            match self.post_once(url, body) {
                Ok(v) => return Ok(v),
                Err(e) if e.retryable() => {
                    log::warn!("{url}: attempt {} of {attempts} failed: {e}", attempt + 1);
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn post_once(&self, url: &str, body: &Value) -> Result<Value, GatewayError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(transport_error)?;
        let status = resp.status().as_u16();
        if status == 429 {
            return Err(GatewayError::RateLimited);
        }
        let text = resp.text().map_err(transport_error)?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::EndpointError {
                status,
                body: excerpt(&text, 200),
            });
        }
        serde_json::from_str(&text).map_err(|e| GatewayError::MalformedResponse(format!("{e}: {}", excerpt(&text, 200))))
    }
}

fn transport_error(e: reqwest::Error) -> GatewayError {
    if e.is_timeout() {
        GatewayError::Timeout
    } else {
        GatewayError::Transport(e.to_string())
    }
}

pub(crate) fn excerpt(text: &str, max_chars: usize) -> String {
    let mut out: String = text.chars().take(max_chars).collect();
    if text.chars().count() > max_chars {
        out.push('…');
    }
    out
}

fn extract_text(response: &Value, chat: bool) -> Result<String, GatewayError> {
    let choice = &response["choices"][0];
    let text = if chat {
        choice["message"]["content"].as_str()
    } else {
        choice["text"].as_str()
    };
    text.map(str::to_string).ok_or_else(|| {
        GatewayError::MalformedResponse(format!("no generated text in {}", excerpt(&response.to_string(), 200)))
    })
}
