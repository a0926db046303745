use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{read_jsonl, sha256_hex, write_jsonl_atomic};
use crate::corpus::CodeSample;

use super::{EntityError, EntityExtractor, EntitySet, REGISTRY_VERSION};

/// One line of the entity cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityCacheRecord {
    pub id: String,
    pub code_hash: String,
    pub backend: String,
    pub registry_version: u32,
    pub entities: EntitySet,
}

/// Extracted entity sets keyed by (code hash, backend, registry version).
/// Records written under another registry version are dropped on load.
#[derive(Debug, Default)]
pub struct EntityCache {
    path: Option<PathBuf>,
    records: Vec<EntityCacheRecord>,
    index: HashMap<(String, String), usize>,
}

impl EntityCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self, EntityError> {
        let records: Vec<EntityCacheRecord> = read_jsonl(path, true).map_err(|e| EntityError::Cache {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut cache = EntityCache {
            path: Some(path.to_path_buf()),
            ..Self::default()
        };
        let stale = records.iter().filter(|r| r.registry_version != REGISTRY_VERSION).count();
        if stale > 0 {
            log::info!("{}: ignoring {stale} records from another registry version", path.display());
        }
        for r in records.into_iter().filter(|r| r.registry_version == REGISTRY_VERSION) {
            cache.put(r);
        }
        Ok(cache)
    }

    fn put(&mut self, record: EntityCacheRecord) {
        let key = (record.code_hash.clone(), record.backend.clone());
        match self.index.get(&key) {
            Some(&i) => self.records[i] = record,
            None => {
                self.index.insert(key, self.records.len());
                self.records.push(record);
            }
        }
    }

    pub fn get(&self, code: &str, backend: &str) -> Option<&EntitySet> {
        self.index
            .get(&(sha256_hex(code), backend.to_string()))
            .map(|&i| &self.records[i].entities)
    }

    pub fn insert(&mut self, id: &str, code: &str, backend: &str, entities: EntitySet) {
        self.put(EntityCacheRecord {
            id: id.to_string(),
            code_hash: sha256_hex(code),
            backend: backend.to_string(),
            registry_version: REGISTRY_VERSION,
            entities,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EntityCacheRecord] {
        &self.records
    }

    /// Rewrites the backing file atomically; no-op for in-memory caches.
    pub fn save(&self) -> Result<(), EntityError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        write_jsonl_atomic(path, &self.records).map_err(|e| EntityError::Cache {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BatchSummary {
    pub total: usize,
    pub cache_hits: usize,
    pub extracted: usize,
}

/// Entity sets for `samples`, keyed by sample id. Cached sets are reused;
/// the rest are extracted on a pool of `concurrency` threads. Successful
/// extractions are saved to the cache even when another sample fails; the
/// first failure (in sample order) is returned wrapped with its sample id.
pub fn extract_batch<'a>(
    samples: impl IntoIterator<Item = &'a CodeSample>,
    extractor: &dyn EntityExtractor,
    cache: &mut EntityCache,
    concurrency: usize,
) -> Result<(HashMap<String, EntitySet>, BatchSummary), EntityError> {
    let backend = extractor.backend_id();
    let mut out = HashMap::new();
    let mut misses = Vec::new();
    let mut summary = BatchSummary::default();
    for s in samples {
        summary.total += 1;
        match cache.get(&s.code, &backend) {
            Some(set) => {
                summary.cache_hits += 1;
                out.insert(s.id.clone(), set.clone());
            }
            None => misses.push(s),
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .expect("building the extraction pool");
    let results: Vec<Result<EntitySet, EntityError>> =
        pool.install(|| misses.par_iter().map(|s| extractor.extract(&s.code, s.language)).collect());

    let mut first_error = None;
    for (s, result) in misses.iter().zip(results) {
        match result {
            Ok(set) => {
                summary.extracted += 1;
                cache.insert(&s.id, &s.code, &backend, set.clone());
                out.insert(s.id.clone(), set);
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(EntityError::Sample {
                        id: s.id.clone(),
                        source: Box::new(e),
                    });
                }
            }
        }
    }
    if summary.extracted > 0 {
        cache.save()?;
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok((out, summary)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, Split};
    use crate::entity::{EntityType, LocalLexical};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Flaky {
        calls: AtomicUsize,
    }

    impl EntityExtractor for Flaky {
        fn backend_id(&self) -> String {
            "flaky".into()
        }

        fn extract(&self, code: &str, language: Language) -> Result<EntitySet, EntityError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if code.contains("boom") {
                return Err(EntityError::RemoteBackendError {
                    status: 500,
                    excerpt: "down".into(),
                });
            }
            LocalLexical::new().extract(code, language)
        }
    }

    fn samples() -> Vec<CodeSample> {
        ["os.mkdir(p)", "boom()", "print(x)"]
            .iter()
            .enumerate()
            .map(|(i, c)| CodeSample::new(format!("s{i}"), *c, "e", Language::Python, Split::Train))
            .collect()
    }

    #[test]
    fn cache_roundtrip_and_reuse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("entities.jsonl");
        let samples = samples();
        let good = [&samples[0], &samples[2]];
        let mut cache = EntityCache::open(&path).unwrap();
        let (sets, summary) = extract_batch(good, &LocalLexical::new(), &mut cache, 2).unwrap();
        assert_eq!(summary, BatchSummary { total: 2, cache_hits: 0, extracted: 2 });
        assert!(sets["s0"].get(EntityType::LIBRARY).contains("os"));

        let mut reopened = EntityCache::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);
        let (again, summary) = extract_batch(good, &LocalLexical::new(), &mut reopened, 2).unwrap();
        assert_eq!(summary.cache_hits, 2);
        assert_eq!(again, sets);
    }

    #[test]
    fn partial_results_survive_a_failure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("entities.jsonl");
        let samples = samples();
        let flaky = Flaky { calls: AtomicUsize::new(0) };
        let mut cache = EntityCache::open(&path).unwrap();
        let err = extract_batch(&samples, &flaky, &mut cache, 1).unwrap_err();
        match &err {
            EntityError::Sample { id, .. } => assert_eq!(id, "s1"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.is_upstream());
        let reopened = EntityCache::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);
        assert!(reopened.get("print(x)", "flaky").is_some());
    }

    #[test]
    fn stale_registry_versions_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("entities.jsonl");
        let old = EntityCacheRecord {
            id: "a".into(),
            code_hash: sha256_hex("f()"),
            backend: "local-lexical".into(),
            registry_version: REGISTRY_VERSION + 1,
            entities: EntitySet::new(),
        };
        write_jsonl_atomic(&path, [&old]).unwrap();
        assert!(EntityCache::open(&path).unwrap().is_empty());
    }
}
