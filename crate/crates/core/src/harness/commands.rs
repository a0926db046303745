use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::{HarnessError, RunSpec};
use crate::corpus::{CodeSample, Corpus, CorpusStats, Language, LengthTokenizer, Split};
use crate::embeddings::{
    embed_batch, EmbedSummary, EmbeddingCache, EmbeddingError, EmbeddingProvider, EmbeddingVector, PrecomputedFile,
    RemoteEmbedder,
};
use crate::entity::{
    extract_batch, BackendKind, BatchSummary, EntityCache, EntityExtractor, EntitySet, LocalLexical, RemoteLlm,
};
use crate::llm::{Gateway, ModelTarget};
use crate::prompting::TemplateFamily;
use crate::similarity::{
    entity_breakdown, EntityMatch, EntityWeights, Features, QueryInput, RankedExample, SelectionConfig, Selector,
    SimilarityError, Strategy,
};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub samples: usize,
    pub train: usize,
    pub test: usize,
    pub language: Language,
    pub intent_labelled: bool,
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} samples ({} train, {} test), {}, {}",
            self.samples,
            self.train,
            self.test,
            self.language.as_str(),
            if self.intent_labelled { "intent-labelled" } else { "no intents" }
        )
    }
}

/// Validates a corpus file and optionally writes it back normalized.
pub fn cmd_ingest(input: &Path, output: Option<&Path>) -> Result<IngestSummary, Error> {
    let corpus = Corpus::ingest(input)?;
    if let Some(out) = output {
        corpus.save(out).map_err(|e| HarnessError::io(out, e))?;
    }
    Ok(IngestSummary {
        samples: corpus.len(),
        train: corpus.split(Split::Train).count(),
        test: corpus.split(Split::Test).count(),
        language: corpus.language(),
        intent_labelled: corpus.is_intent_labelled(),
    })
}

pub fn cmd_stats(corpus: &Path, tokenizer: LengthTokenizer) -> Result<CorpusStats, Error> {
    Ok(Corpus::ingest(corpus)?.stats(tokenizer)?)
}

/// Where entity sets and embeddings come from, and whether missing ones may
/// be computed.
#[derive(Debug, Clone)]
pub struct FeatureSources {
    pub cache_dir: PathBuf,
    pub auto_populate: bool,
    pub concurrency: usize,
    pub entity_backend: BackendKind,
    pub ner_model: Option<ModelTarget>,
    pub embeddings_file: Option<PathBuf>,
    pub embedding_endpoint: Option<String>,
    pub embedding_model: Option<String>,
    pub gateway: Arc<Gateway>,
}

impl FeatureSources {
    /// Local entity extraction, no embeddings, populating on demand.
    pub fn local(cache_dir: impl Into<PathBuf>) -> Self {
        FeatureSources {
            cache_dir: cache_dir.into(),
            auto_populate: true,
            concurrency: 4,
            entity_backend: BackendKind::LocalLexical,
            ner_model: None,
            embeddings_file: None,
            embedding_endpoint: None,
            embedding_model: None,
            gateway: Arc::new(Gateway::new()),
        }
    }

    pub fn from_spec(spec: &RunSpec, gateway: Arc<Gateway>) -> Self {
        let ner_model = spec.ner_model.as_ref().map(|name| ModelTarget {
            name: name.clone(),
            endpoint: spec.ner_endpoint.clone().unwrap_or_else(|| spec.endpoint.clone()),
            // the NER prompt is built by the backend, the family is unused
            family: TemplateFamily::HumanAssistant,
            api: spec.ner_api,
        });
        FeatureSources {
            cache_dir: spec.cache_dir.clone(),
            auto_populate: spec.auto_populate,
            concurrency: spec.concurrency,
            entity_backend: spec.entity_backend,
            ner_model,
            embeddings_file: spec.embeddings_file.clone(),
            embedding_endpoint: spec.embedding_endpoint.clone(),
            embedding_model: spec.embedding_model.clone(),
            gateway,
        }
    }

    pub fn entity_cache_path(&self) -> PathBuf {
        self.cache_dir.join("entities.jsonl")
    }

    pub fn embedding_cache_path(&self) -> PathBuf {
        self.cache_dir.join("embeddings.jsonl")
    }

    pub fn extractor(&self) -> Result<Box<dyn EntityExtractor>, HarnessError> {
        match self.entity_backend {
            BackendKind::LocalLexical => Ok(Box::new(LocalLexical::new())),
            BackendKind::RemoteLlm => {
                let model = self
                    .ner_model
                    .clone()
                    .ok_or_else(|| HarnessError::InvalidSpec("the remote entity backend needs a NER model".into()))?;
                Ok(Box::new(RemoteLlm::new(self.gateway.clone(), model)))
            }
        }
    }

    pub fn embedding_provider(&self) -> Result<Box<dyn EmbeddingProvider>, Error> {
        if let Some(file) = &self.embeddings_file {
            return Ok(Box::new(PrecomputedFile::load(file, None)?));
        }
        if let Some(url) = &self.embedding_endpoint {
            let model = self.embedding_model.clone().unwrap_or_else(|| "default".into());
            return Ok(Box::new(RemoteEmbedder::new(self.gateway.clone(), url.clone(), model)));
        }
        Err(HarnessError::InvalidSpec("no embedding source configured".into()).into())
    }

    /// Entity sets for `samples`. Without auto-population only cached sets
    /// are used and the first sample without one is reported.
    pub fn entities(&self, samples: &[&CodeSample]) -> Result<(HashMap<String, EntitySet>, BatchSummary), Error> {
        let extractor = self.extractor()?;
        let mut cache = EntityCache::open(&self.entity_cache_path())?;
        if self.auto_populate {
            return Ok(extract_batch(samples.iter().copied(), extractor.as_ref(), &mut cache, self.concurrency)?);
        }
        let backend = extractor.backend_id();
        let mut out = HashMap::new();
        for s in samples {
            let set = cache
                .get(&s.code, &backend)
                .ok_or_else(|| SimilarityError::MissingEntitySet(s.id.clone()))?;
            out.insert(s.id.clone(), set.clone());
        }
        let summary = BatchSummary {
            total: samples.len(),
            cache_hits: samples.len(),
            extracted: 0,
        };
        Ok((out, summary))
    }

    pub fn embeddings(&self, samples: &[&CodeSample]) -> Result<(HashMap<String, EmbeddingVector>, EmbedSummary), Error> {
        let mut cache = EmbeddingCache::open(&self.embedding_cache_path())?;
        if self.auto_populate {
            let provider = self.embedding_provider()?;
            return Ok(embed_batch(samples.iter().copied(), provider.as_ref(), &mut cache, self.concurrency)?);
        }
        let provider_id = match self.embedding_provider() {
            Ok(p) => p.provider_id(),
            Err(_) => return Err(SimilarityError::MissingEmbedding(samples.first().map_or(String::new(), |s| s.id.clone())).into()),
        };
        let mut out = HashMap::new();
        let mut dim = None;
        for s in samples {
            let v = cache
                .get(&s.code, &provider_id)
                .ok_or_else(|| SimilarityError::MissingEmbedding(s.id.clone()))?;
            if let Some(d) = dim.filter(|&d| d != v.dim()) {
                return Err(EmbeddingError::DimensionDrift { expected: d, found: v.dim() }.into());
            }
            dim = Some(v.dim());
            out.insert(s.id.clone(), v);
        }
        let summary = EmbedSummary {
            total: samples.len(),
            cache_hits: samples.len(),
            embedded: 0,
            dim: dim.unwrap_or(0),
        };
        Ok((out, summary))
    }
}

/// Extracts entities for every sample of the corpus into the cache.
pub fn cmd_extract(corpus: &Path, sources: &FeatureSources) -> Result<BatchSummary, Error> {
    let corpus = Corpus::ingest(corpus)?;
    let samples: Vec<&CodeSample> = corpus.samples().iter().collect();
    let populate = FeatureSources {
        auto_populate: true,
        ..sources.clone()
    };
    Ok(populate.entities(&samples)?.1)
}

/// Embeds every sample of the corpus into the cache.
pub fn cmd_embed(corpus: &Path, sources: &FeatureSources) -> Result<EmbedSummary, Error> {
    let corpus = Corpus::ingest(corpus)?;
    let samples: Vec<&CodeSample> = corpus.samples().iter().collect();
    let populate = FeatureSources {
        auto_populate: true,
        ..sources.clone()
    };
    Ok(populate.embeddings(&samples)?.1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankQuery {
    /// A sample of the corpus, by id.
    Id(String),
    /// Free-standing code in the corpus language.
    Code(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct RankRow {
    pub example: RankedExample,
    /// Per-entity-type terms, for the `ner` strategy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<Vec<EntityMatch>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankTable {
    pub query_id: String,
    pub query_code: String,
    pub strategy: Strategy,
    pub rows: Vec<RankRow>,
}

impl fmt::Display for RankTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "query {}: {}", self.query_id, one_line(&self.query_code, 100))?;
        writeln!(f, "{:>4} {:>8}  {:<12} code", "rank", "score", "id")?;
        for row in &self.rows {
            let ex = &row.example;
            writeln!(
                f,
                "{:>4} {:>8.4}  {:<12} {}",
                ex.rank,
                ex.score.value,
                ex.sample.id,
                one_line(&ex.sample.code, 80)
            )?;
            if let Some(breakdown) = &row.breakdown {
                for m in breakdown.iter().filter(|m| m.jaccard > 0.0) {
                    writeln!(
                        f,
                        "{:>14} {:<15} w={:<4} jaccard={:.3} shared={{{}}}",
                        "",
                        m.entity_type.name(),
                        m.weight,
                        m.jaccard,
                        m.shared.join(",")
                    )?;
                }
            }
        }
        Ok(())
    }
}

fn one_line(s: &str, max: usize) -> String {
    let flat = s.split_whitespace().collect::<Vec<_>>().join(" ");
    crate::llm::excerpt(&flat, max)
}

/// Top-k train samples for a query, with entity breakdowns for `ner`.
pub fn cmd_rank(
    corpus: &Corpus,
    query: &RankQuery,
    strategy: Strategy,
    k: usize,
    weights: EntityWeights,
    sources: &FeatureSources,
) -> Result<RankTable, Error> {
    let config = SelectionConfig::new(strategy, k)?.with_weights(weights);
    let (query_id, query_code) = match query {
        RankQuery::Id(id) => {
            let s = corpus.get(id).ok_or_else(|| HarnessError::UnknownSample(id.clone()))?;
            (s.id.clone(), s.code.clone())
        }
        RankQuery::Code(code) => ("<query>".to_string(), code.clone()),
    };
    let query_sample = CodeSample::new(&query_id, &query_code, "", corpus.language(), Split::Test);
    let train: Vec<&CodeSample> = corpus.split(Split::Train).collect();

    let (entities, embeddings) = match strategy {
        Strategy::Token => (HashMap::new(), HashMap::new()),
        Strategy::Ner => {
            let (mut sets, _) = sources.entities(&train)?;
            if !sets.contains_key(&query_id) {
                let set = match query {
                    RankQuery::Id(_) => sources.entities(&[&query_sample])?.0.remove(&query_id),
                    RankQuery::Code(code) => Some(sources.extractor()?.extract(code, corpus.language())?),
                };
                sets.insert(query_id.clone(), set.unwrap_or_default());
            }
            (sets, HashMap::new())
        }
        Strategy::Semantic => {
            let (mut vecs, _) = sources.embeddings(&train)?;
            if !vecs.contains_key(&query_id) {
                let v = match query {
                    RankQuery::Id(_) => sources.embeddings(&[&query_sample])?.0.remove(&query_id),
                    RankQuery::Code(_) => Some(sources.embedding_provider()?.embed(&query_sample)?),
                };
                if let Some(v) = v {
                    vecs.insert(query_id.clone(), v);
                }
            }
            (HashMap::new(), vecs)
        }
    };
    let features = Features {
        entities: Some(&entities),
        embeddings: Some(&embeddings),
    };
    let selector = Selector::new(corpus, config, features)?;
    let ranked = match strategy {
        Strategy::Token => selector.rank_by(&query_id, QueryInput::Code(&query_code))?,
        _ => selector.rank(&query_sample, features)?,
    };
    let rows = ranked
        .into_iter()
        .map(|example| {
            let breakdown = (strategy == Strategy::Ner).then(|| {
                entity_breakdown(&entities[&query_id], &entities[&example.sample.id], &config.weights)
            });
            RankRow { example, breakdown }
        })
        .collect();
    Ok(RankTable {
        query_id,
        query_code,
        strategy,
        rows,
    })
}
