//! Scoring and ranking of training samples against a query snippet.
//!
//! Three strategies are supported:
//!
//! * `token`: Jaccard similarity of keyword-stripped, lowercased token sets;
//! * `semantic`: cosine similarity of code embeddings;
//! * `ner`: weighted sum of per-entity-type Jaccard similarities,
//!   `sum_i w_i * jaccard(E_i(q), E_i(d))` over the full entity registry.
//!
//! Ranking sorts by descending score; ties go to the sample that came first
//! in the originating corpus file.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CodeSample, Corpus, Language, Split};
use crate::embeddings::EmbeddingVector;
use crate::entity::{EntitySet, EntityType};
use crate::tokenize::Tokenizer;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("query is {query} but candidates are {candidates}")]
    LanguageMismatch { query: Language, candidates: Language },
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity of a zero vector")]
    ZeroVector,
    #[error("no embedding for sample {0}")]
    MissingEmbedding(String),
    #[error("no entity set for sample {0}")]
    MissingEntitySet(String),
    #[error("train split is empty")]
    EmptyTrainSplit,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("entity weights must be non-negative and finite, got {0}")]
    InvalidWeight(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Token,
    Semantic,
    Ner,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Token => "token",
            Strategy::Semantic => "semantic",
            Strategy::Ner => "ner",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token" => Ok(Strategy::Token),
            "semantic" => Ok(Strategy::Semantic),
            "ner" => Ok(Strategy::Ner),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub strategy: Strategy,
}

/// `|a ∩ b| / |a ∪ b|`, and 0 when both sets are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

pub fn score_token(
    query: &CodeSample,
    candidate: &CodeSample,
    tokenizer: &Tokenizer,
) -> Result<SimilarityScore, SimilarityError> {
    if query.language != candidate.language {
        return Err(SimilarityError::LanguageMismatch {
            query: query.language,
            candidates: candidate.language,
        });
    }
    Ok(SimilarityScore {
        value: jaccard(&tokenizer.token_set(&query.code), &tokenizer.token_set(&candidate.code)),
        strategy: Strategy::Token,
    })
}

/// Per-type weights of the entity score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntityWeights([f64; EntityType::COUNT]);

impl Default for EntityWeights {
    /// 0 for data types, variables and values; 1 for every other type.
    fn default() -> Self {
        let mut w = [1.0; EntityType::COUNT];
        for ty in [EntityType::DATA_TYPE, EntityType::VARIABLE, EntityType::VALUE] {
            w[ty.index()] = 0.0;
        }
        EntityWeights(w)
    }
}

impl EntityWeights {
    pub fn uniform(weight: f64) -> Result<Self, SimilarityError> {
        check_weight(weight)?;
        Ok(EntityWeights([weight; EntityType::COUNT]))
    }

    pub fn zeros() -> Self {
        EntityWeights([0.0; EntityType::COUNT])
    }

    pub fn get(&self, ty: EntityType) -> f64 {
        self.0[ty.index()]
    }

    pub fn set(&mut self, ty: EntityType, weight: f64) -> Result<(), SimilarityError> {
        check_weight(weight)?;
        self.0[ty.index()] = weight;
        Ok(())
    }

    pub fn with(mut self, ty: EntityType, weight: f64) -> Result<Self, SimilarityError> {
        self.set(ty, weight)?;
        Ok(self)
    }

    /// Upper bound of the entity score.
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Parses `type=weight` pairs separated by commas, applied on top of the
    /// defaults, e.g. `class=2,function=0.5`.
    pub fn parse_overrides(spec: &str) -> Result<Self, String> {
        let mut w = EntityWeights::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected type=weight, got `{part}`"))?;
            let ty: EntityType = name.parse()?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| format!("invalid weight `{value}`"))?;
            w.set(ty, value).map_err(|e| e.to_string())?;
        }
        Ok(w)
    }
}

fn check_weight(w: f64) -> Result<(), SimilarityError> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(SimilarityError::InvalidWeight(w))
    }
}

pub fn score_entity(query: &EntitySet, candidate: &EntitySet, weights: &EntityWeights) -> SimilarityScore {
    let value = EntityType::all()
        .map(|ty| {
            let w = weights.get(ty);
            if w == 0.0 {
                0.0
            } else {
                w * jaccard(query.get(ty), candidate.get(ty))
            }
        })
        .sum();
    SimilarityScore {
        value,
        strategy: Strategy::Ner,
    }
}

/// One row of an entity-score explanation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityMatch {
    pub entity_type: EntityType,
    pub weight: f64,
    pub jaccard: f64,
    pub contribution: f64,
    pub shared: Vec<String>,
}

/// Per-type terms of [`score_entity`] for the types present in either set.
pub fn entity_breakdown(query: &EntitySet, candidate: &EntitySet, weights: &EntityWeights) -> Vec<EntityMatch> {
    EntityType::all()
        .filter(|&ty| !query.get(ty).is_empty() || !candidate.get(ty).is_empty())
        .map(|ty| {
            let (q, d) = (query.get(ty), candidate.get(ty));
            let j = jaccard(q, d);
            EntityMatch {
                entity_type: ty,
                weight: weights.get(ty),
                jaccard: j,
                contribution: weights.get(ty) * j,
                shared: q.intersection(d).cloned().collect(),
            }
        })
        .collect()
}

pub fn score_semantic(query: &EmbeddingVector, candidate: &EmbeddingVector) -> Result<SimilarityScore, SimilarityError> {
    let (q, d) = (query.values(), candidate.values());
    if q.len() != d.len() {
        return Err(SimilarityError::DimensionMismatch {
            left: q.len(),
            right: d.len(),
        });
    }
    let (mut dot, mut nq, mut nd) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in q.iter().zip(d) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nq += a * a;
        nd += b * b;
    }
    if nq == 0.0 || nd == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok(SimilarityScore {
        value: (dot / (nq.sqrt() * nd.sqrt())).clamp(-1.0, 1.0),
        strategy: Strategy::Semantic,
    })
}

/// Strategy, number of demonstrations and entity weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub strategy: Strategy,
    pub k: usize,
    pub weights: EntityWeights,
}

impl SelectionConfig {
    pub const DEFAULT_K: usize = 10;

    pub fn new(strategy: Strategy, k: usize) -> Result<Self, SimilarityError> {
        if k == 0 {
            return Err(SimilarityError::InvalidK);
        }
        Ok(SelectionConfig {
            strategy,
            k,
            weights: EntityWeights::default(),
        })
    }

    pub fn with_weights(mut self, weights: EntityWeights) -> Self {
        self.weights = weights;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedExample {
    pub sample: CodeSample,
    pub score: SimilarityScore,
    /// 1-based.
    pub rank: usize,
}

/// Precomputed entity sets and embeddings, keyed by sample id.
#[derive(Debug, Clone, Copy, Default)]
pub struct Features<'a> {
    pub entities: Option<&'a HashMap<String, EntitySet>>,
    pub embeddings: Option<&'a HashMap<String, EmbeddingVector>>,
}

/// What the query is compared by; [`Selector::rank`] derives it from the
/// query sample and the feature maps.
#[derive(Debug, Clone, Copy)]
pub enum QueryInput<'q> {
    Code(&'q str),
    Entities(&'q EntitySet),
    Embedding(&'q EmbeddingVector),
}

enum Feature<'a> {
    Tokens(BTreeSet<String>),
    Entities(&'a EntitySet),
    Embedding(&'a EmbeddingVector),
}

/// Ranks queries against a fixed candidate pool, computing candidate
/// features once.
pub struct Selector<'a> {
    candidates: Vec<(&'a CodeSample, Feature<'a>)>,
    language: Language,
    tokenizer: Tokenizer,
    config: SelectionConfig,
}

impl<'a> Selector<'a> {
    /// Uses the train split of `corpus` as the candidate pool.
    pub fn new(corpus: &'a Corpus, config: SelectionConfig, features: Features<'a>) -> Result<Self, SimilarityError> {
        Self::from_candidates(corpus.split(Split::Train), corpus.language(), config, features)
    }

    pub fn from_candidates(
        candidates: impl IntoIterator<Item = &'a CodeSample>,
        language: Language,
        config: SelectionConfig,
        features: Features<'a>,
    ) -> Result<Self, SimilarityError> {
        if config.k == 0 {
            return Err(SimilarityError::InvalidK);
        }
        let tokenizer = Tokenizer::for_language(language);
        let candidates = candidates
            .into_iter()
            .map(|s| {
                let feature = match config.strategy {
                    Strategy::Token => Feature::Tokens(tokenizer.token_set(&s.code)),
                    Strategy::Ner => Feature::Entities(
                        features
                            .entities
                            .and_then(|m| m.get(&s.id))
                            .ok_or_else(|| SimilarityError::MissingEntitySet(s.id.clone()))?,
                    ),
                    Strategy::Semantic => Feature::Embedding(
                        features
                            .embeddings
                            .and_then(|m| m.get(&s.id))
                            .ok_or_else(|| SimilarityError::MissingEmbedding(s.id.clone()))?,
                    ),
                };
                Ok((s, feature))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if candidates.is_empty() {
            return Err(SimilarityError::EmptyTrainSplit);
        }
        Ok(Selector {
            candidates,
            language,
            tokenizer,
            config,
        })
    }

    pub fn config(&self) -> &SelectionConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Top-k candidates for `query`, looking up its entity set or embedding
    /// by id in `features`.
    pub fn rank(&self, query: &CodeSample, features: Features<'_>) -> Result<Vec<RankedExample>, SimilarityError> {
        if query.language != self.language {
            return Err(SimilarityError::LanguageMismatch {
                query: query.language,
                candidates: self.language,
            });
        }
        match self.config.strategy {
            Strategy::Token => self.rank_by(&query.id, QueryInput::Code(&query.code)),
            Strategy::Ner => {
                let e = features
                    .entities
                    .and_then(|m| m.get(&query.id))
                    .ok_or_else(|| SimilarityError::MissingEntitySet(query.id.clone()))?;
                self.rank_by(&query.id, QueryInput::Entities(e))
            }
            Strategy::Semantic => {
                let v = features
                    .embeddings
                    .and_then(|m| m.get(&query.id))
                    .ok_or_else(|| SimilarityError::MissingEmbedding(query.id.clone()))?;
                self.rank_by(&query.id, QueryInput::Embedding(v))
            }
        }
    }

    /// Ranks with explicit query features. Candidates whose id equals
    /// `query_id` are skipped.
    pub fn rank_by(&self, query_id: &str, input: QueryInput<'_>) -> Result<Vec<RankedExample>, SimilarityError> {
        let query_tokens = match input {
            QueryInput::Code(code) => Some(self.tokenizer.token_set(code)),
            _ => None,
        };
        let mut scored: Vec<(&CodeSample, f64)> = self
            .candidates
            .par_iter()
            .filter(|(s, _)| s.id != query_id)
            .map(|(s, feature)| {
                let value = match (feature, &input) {
                    (Feature::Tokens(t), QueryInput::Code(_)) => {
                        jaccard(query_tokens.as_ref().expect("tokenized above"), t)
                    }
                    (Feature::Entities(e), QueryInput::Entities(q)) => score_entity(q, e, &self.config.weights).value,
                    (Feature::Embedding(v), QueryInput::Embedding(q)) => score_semantic(q, v)?.value,
                    _ => panic!("query input does not match the selector strategy"),
                };
                Ok((*s, value))
            })
            .collect::<Result<_, SimilarityError>>()?;
        scored.sort_by(|a, b| by_score_then_position(a.1, a.0, b.1, b.0));
        scored.truncate(self.config.k);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (s, value))| RankedExample {
                sample: s.clone(),
                score: SimilarityScore {
                    value,
                    strategy: self.config.strategy,
                },
                rank: i + 1,
            })
            .collect())
    }
}

fn by_score_then_position(sa: f64, a: &CodeSample, sb: f64, b: &CodeSample) -> Ordering {
    sb.total_cmp(&sa)
        .then(a.ordinal.cmp(&b.ordinal))
        .then_with(|| a.id.cmp(&b.id))
}

/// Ranks the train split of `corpus` against `query`.
pub fn rank(
    query: &CodeSample,
    corpus: &Corpus,
    config: &SelectionConfig,
    features: Features<'_>,
) -> Result<Vec<RankedExample>, SimilarityError> {
    Selector::new(corpus, *config, features)?.rank(query, features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::entity::{EntityExtractor, LocalLexical};

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn py(id: &str, code: &str) -> CodeSample {
        CodeSample::new(id, code, format!("explains {id}"), Language::Python, Split::Train)
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])), 0.5);
        assert_eq!(jaccard(&set(&["a"]), &set(&["a"])), 1.0);
        assert_eq!(jaccard::<String>(&BTreeSet::new(), &BTreeSet::new()), 0.0);
    }

    #[test]
    fn token_scores() {
        let t = Tokenizer::for_language(Language::Python);
        let s = |a: &str, b: &str| score_token(&py("q", a), &py("d", b), &t).unwrap().value;
        assert_eq!(s("open(f)", "open(f)"), 1.0);
        assert_eq!(s("open(f)", "close(g)"), 0.0);
        assert!((s("open(filename, 'w')", "open(filename)") - 2.0 / 3.0).abs() < 1e-12);
        let java = CodeSample::new("j", "f()", "e", Language::Java, Split::Train);
        assert!(matches!(
            score_token(&py("q", "f()"), &java, &t),
            Err(SimilarityError::LanguageMismatch { .. })
        ));
    }

    #[test]
    fn entity_scores_on_worked_examples() {
        let ex = |c: &str| LocalLexical.extract(c, Language::Python).unwrap();
        let w = EntityWeights::default();
        let q = ex("os.mkdir(path)");
        assert_eq!(score_entity(&q, &ex("print(os.listdir(dname))"), &w).value, 1.0);
        assert_eq!(score_entity(&q, &ex("x=scipy.matrix([1,2,3]).transpose()"), &w).value, 0.0);
        assert_eq!(
            score_entity(&q, &ex("print(os.listdir(dname))"), &EntityWeights::zeros()).value,
            0.0
        );
    }

    #[test]
    fn default_weights() {
        let w = EntityWeights::default();
        assert_eq!(w.get(EntityType::VARIABLE), 0.0);
        assert_eq!(w.get(EntityType::VALUE), 0.0);
        assert_eq!(w.get(EntityType::DATA_TYPE), 0.0);
        assert_eq!(w.get(EntityType::LIBRARY), 1.0);
        assert_eq!(w.get(EntityType::from_index(19).unwrap()), 1.0);
        assert_eq!(w.total(), 17.0);
        assert!(w.with(EntityType::CLASS, -1.0).is_err());
        let parsed = EntityWeights::parse_overrides("class=2, data type=0.5").unwrap();
        assert_eq!(parsed.get(EntityType::CLASS), 2.0);
        assert_eq!(parsed.get(EntityType::DATA_TYPE), 0.5);
    }

    #[test]
    fn cosine_examples() {
        let v = |x: &[f32]| EmbeddingVector::new(x.to_vec(), "t").unwrap();
        assert!((score_semantic(&v(&[0.3, 0.4]), &v(&[0.3, 0.4])).unwrap().value - 1.0).abs() < 1e-12);
        assert_eq!(score_semantic(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap().value, 0.0);
        assert_eq!(score_semantic(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0])).unwrap().value, -1.0);
        assert_eq!(
            score_semantic(&v(&[1.0, 0.0]), &v(&[1.0, 0.0, 0.0])),
            Err(SimilarityError::DimensionMismatch { left: 2, right: 3 })
        );
    }

    #[test]
    fn rank_excludes_query_and_breaks_ties_by_position() {
        let corpus = Corpus::from_samples(vec![py("a", "f(x)"), py("b", "f(x)"), py("q", "f(x)"), py("c", "g(y)")]).unwrap();
        let cfg = SelectionConfig::new(Strategy::Token, 10).unwrap();
        let query = corpus.get("q").unwrap().clone();
        let ranked = rank(&query, &corpus, &cfg, Features::default()).unwrap();
        let ids: Vec<_> = ranked.iter().map(|r| r.sample.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(ranked.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn rank_reports_missing_features() {
        let corpus = Corpus::from_samples(vec![py("a", "f(x)")]).unwrap();
        let q = py("q", "f(x)");
        let ner = SelectionConfig::new(Strategy::Ner, 1).unwrap();
        assert_eq!(
            rank(&q, &corpus, &ner, Features::default()),
            Err(SimilarityError::MissingEntitySet("a".into()))
        );
        let sem = SelectionConfig::new(Strategy::Semantic, 1).unwrap();
        assert_eq!(
            rank(&q, &corpus, &sem, Features::default()),
            Err(SimilarityError::MissingEmbedding("a".into()))
        );
        assert_eq!(SelectionConfig::new(Strategy::Token, 0), Err(SimilarityError::InvalidK));
    }

    #[test]
    fn empty_train_split() {
        let corpus = Corpus::from_samples(vec![CodeSample::new("t", "f()", "", Language::Python, Split::Test)]).unwrap();
        let cfg = SelectionConfig::new(Strategy::Token, 3).unwrap();
        assert_eq!(
            rank(&py("q", "f()"), &corpus, &cfg, Features::default()),
            Err(SimilarityError::EmptyTrainSplit)
        );
    }

    #[test]
    fn breakdown_names_shared_entities() {
        let ex = |c: &str| LocalLexical.extract(c, Language::Python).unwrap();
        let rows = entity_breakdown(&ex("os.mkdir(path)"), &ex("print(os.listdir(dname))"), &EntityWeights::default());
        let lib = rows.iter().find(|r| r.entity_type == EntityType::LIBRARY).unwrap();
        assert_eq!(lib.shared, ["os"]);
        assert_eq!(lib.contribution, 1.0);
        let total: f64 = rows.iter().map(|r| r.contribution).sum();
        assert_eq!(total, 1.0);
    }
}
