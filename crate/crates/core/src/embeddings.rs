//! Code embeddings for semantic selection.
//!
//! Vectors come from a provider: a file of precomputed vectors keyed by
//! sample id, or a remote endpoint that embeds code on request. Either way
//! they can be cached on disk keyed by (code hash, provider id).

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::cache::{read_jsonl, sha256_hex, write_jsonl_atomic};
use crate::corpus::CodeSample;
use crate::llm::{Gateway, GatewayError};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding provider has no vector for sample {id}")]
    ProviderUnavailable { id: String },
    #[error("embedding dimension changed from {expected} to {found}")]
    DimensionDrift { expected: usize, found: usize },
    #[error("embedding is {0}")]
    InvalidVector(&'static str),
    #[error("embedding endpoint: {0}")]
    Remote(#[from] GatewayError),
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<EmbeddingError>,
    },
    #[error("{path}: {reason}")]
    File { path: String, reason: String },
}

impl EmbeddingError {
    pub fn is_upstream(&self) -> bool {
        match self {
            EmbeddingError::Remote(e) => e.is_upstream(),
            EmbeddingError::Sample { source, .. } => source.is_upstream(),
            _ => false,
        }
    }
}

/// A non-empty, finite, non-zero vector tagged with the provider that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    provider_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>, provider_id: impl Into<String>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::InvalidVector("empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::InvalidVector("not finite"));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(EmbeddingError::InvalidVector("all zeros"));
        }
        Ok(EmbeddingVector {
            values,
            provider_id: provider_id.into(),
        })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// Identifies the model (and pooling) behind the vectors; part of the
    /// cache key.
    fn provider_id(&self) -> String;

    fn embed(&self, sample: &CodeSample) -> Result<EmbeddingVector, EmbeddingError>;
}

#[derive(Debug, Deserialize)]
struct PrecomputedRecord {
    id: String,
    #[serde(alias = "embedding")]
    values: Vec<f32>,
}

/// Vectors read from a JSONL file of `{"id": ..., "values": [...]}` lines.
#[derive(Debug, Clone)]
pub struct PrecomputedFile {
    provider_id: String,
    vectors: HashMap<String, Vec<f32>>,
}

impl PrecomputedFile {
    /// The provider id is `precomputed:<name>`, where `name` defaults to
    /// the file stem.
    pub fn load(path: &Path, name: Option<&str>) -> Result<Self, EmbeddingError> {
        let file_err = |reason: String| EmbeddingError::File {
            path: path.display().to_string(),
            reason,
        };
        if !path.exists() {
            return Err(file_err("no such file".into()));
        }
        let records: Vec<PrecomputedRecord> = read_jsonl(path, false).map_err(|e| file_err(e.to_string()))?;
        let mut dim = None;
        let mut vectors = HashMap::with_capacity(records.len());
        for r in records {
            match dim {
                None => dim = Some(r.values.len()),
                Some(d) if d != r.values.len() => {
                    return Err(EmbeddingError::DimensionDrift {
                        expected: d,
                        found: r.values.len(),
                    })
                }
                Some(_) => {}
            }
            vectors.insert(r.id, r.values);
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("embeddings");
        Ok(PrecomputedFile {
            provider_id: format!("precomputed:{}", name.unwrap_or(stem)),
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for PrecomputedFile {
    fn provider_id(&self) -> String {
        self.provider_id.clone()
    }

    fn embed(&self, sample: &CodeSample) -> Result<EmbeddingVector, EmbeddingError> {
        let values = self
            .vectors
            .get(&sample.id)
            .ok_or_else(|| EmbeddingError::ProviderUnavailable { id: sample.id.clone() })?;
        EmbeddingVector::new(values.clone(), &self.provider_id)
    }
}

/// Embeds code through `POST {url}` with `{"input": code, "model": name}`.
/// Accepts `{"embedding": [...]}` or the OpenAI `{"data": [{"embedding": [...]}]}`
/// reply shapes.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    gateway: Arc<Gateway>,
    url: String,
    model: String,
}

impl RemoteEmbedder {
    pub fn new(gateway: Arc<Gateway>, url: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteEmbedder {
            gateway,
            url: url.into(),
            model: model.into(),
        }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn provider_id(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn embed(&self, sample: &CodeSample) -> Result<EmbeddingVector, EmbeddingError> {
        let reply = self
            .gateway
            .post_json(&self.url, &json!({ "input": sample.code, "model": self.model }))?;
        let raw = reply
            .get("embedding")
            .or_else(|| reply.pointer("/data/0/embedding"))
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::MalformedResponse("no embedding in reply".into()))?;
        let values = raw
            .iter()
            .map(|v| v.as_f64().map(|f| f as f32))
            .collect::<Option<Vec<f32>>>()
            .ok_or_else(|| GatewayError::MalformedResponse("non-numeric embedding".into()))?;
        EmbeddingVector::new(values, self.provider_id())
    }
}

/// One line of the embedding cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCacheRecord {
    pub id: String,
    pub code_hash: String,
    pub provider_id: String,
    pub dim: usize,
    pub values: Vec<f32>,
}

#[derive(Debug, Default)]
pub struct EmbeddingCache {
    path: Option<PathBuf>,
    records: Vec<EmbeddingCacheRecord>,
    index: HashMap<(String, String), usize>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self, EmbeddingError> {
        let records: Vec<EmbeddingCacheRecord> = read_jsonl(path, true).map_err(|e| EmbeddingError::File {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut cache = EmbeddingCache {
            path: Some(path.to_path_buf()),
            ..Self::default()
        };
        for r in records {
            cache.put(r);
        }
        Ok(cache)
    }

    fn put(&mut self, r: EmbeddingCacheRecord) {
        let key = (r.code_hash.clone(), r.provider_id.clone());
        match self.index.get(&key) {
            Some(&i) => self.records[i] = r,
            None => {
                self.index.insert(key, self.records.len());
                self.records.push(r);
            }
        }
    }

    pub fn get(&self, code: &str, provider_id: &str) -> Option<EmbeddingVector> {
        let &i = self.index.get(&(sha256_hex(code), provider_id.to_string()))?;
        EmbeddingVector::new(self.records[i].values.clone(), provider_id).ok()
    }

    pub fn insert(&mut self, id: &str, code: &str, v: &EmbeddingVector) {
        self.put(EmbeddingCacheRecord {
            id: id.to_string(),
            code_hash: sha256_hex(code),
            provider_id: v.provider_id.clone(),
            dim: v.dim(),
            values: v.values.clone(),
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn save(&self) -> Result<(), EmbeddingError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        write_jsonl_atomic(path, &self.records).map_err(|e| EmbeddingError::File {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EmbedSummary {
    pub total: usize,
    pub cache_hits: usize,
    pub embedded: usize,
    pub dim: usize,
}

/// Vectors for `samples`, keyed by sample id, reusing cached ones. All
/// vectors must share one dimension. New vectors are saved even when a later
/// sample fails; the first failure is returned with its sample id.
pub fn embed_batch<'a>(
    samples: impl IntoIterator<Item = &'a CodeSample>,
    provider: &dyn EmbeddingProvider,
    cache: &mut EmbeddingCache,
    concurrency: usize,
) -> Result<(HashMap<String, EmbeddingVector>, EmbedSummary), EmbeddingError> {
    let pid = provider.provider_id();
    let mut out = HashMap::new();
    let mut misses = Vec::new();
    let mut summary = EmbedSummary::default();
    let mut dim: Option<usize> = None;
    let mut check_dim = |v: &EmbeddingVector| match dim {
        Some(d) if d != v.dim() => Err(EmbeddingError::DimensionDrift {
            expected: d,
            found: v.dim(),
        }),
        _ => {
            dim = Some(v.dim());
            Ok(())
        }
    };
    for s in samples {
        summary.total += 1;
        match cache.get(&s.code, &pid) {
            Some(v) => {
                check_dim(&v)?;
                summary.cache_hits += 1;
                out.insert(s.id.clone(), v);
            }
            None => misses.push(s),
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .expect("building the embedding pool");
    let results: Vec<_> = pool.install(|| misses.par_iter().map(|s| provider.embed(s)).collect());

    let mut first_error = None;
    for (s, result) in misses.iter().zip(results) {
        let result = result.and_then(|v| check_dim(&v).map(|_| v));
        match result {
            Ok(v) => {
                summary.embedded += 1;
                cache.insert(&s.id, &s.code, &v);
                out.insert(s.id.clone(), v);
            }
            Err(e) => {
                first_error.get_or_insert(EmbeddingError::Sample {
                    id: s.id.clone(),
                    source: Box::new(e),
                });
            }
        }
    }
    if summary.embedded > 0 {
        cache.save()?;
    }
    summary.dim = dim.unwrap_or(0);
    match first_error {
        Some(e) => Err(e),
        None => Ok((out, summary)),
    }
}
