//! C ABI over the selshot library.
//!
//! Conventions:
//! - every fallible function returns a [`SelshotStatus`]; on failure a
//!   message is kept per thread and read with [`selshot_last_error_message`].
//! - objects are opaque handles created by `*_new`/`*_load` and released with
//!   the matching `*_free`.
//! - strings handed out by the library (`out_json` parameters) are UTF-8,
//!   NUL-terminated and must be released with [`selshot_string_free`].

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use selshot::corpus::{Corpus, CorpusError, Language, Split};
use selshot::embeddings::{EmbeddingError, EmbeddingProvider, EmbeddingVector, PrecomputedFile};
use selshot::entity::{EntityExtractor, EntitySet, LocalLexical};
use selshot::metrics::{score_pair, MetricError};
use selshot::similarity::{
    score_token, EntityWeights, Features, QueryInput, RankedExample, SelectionConfig, Selector, SimilarityError,
    Strategy,
};
use selshot::tokenize::Tokenizer;
use selshot::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelshotStatus {
    Ok = 0,
    /// Null pointer, invalid UTF-8 or an out-of-range parameter.
    InvalidArgument = 1,
    /// A file could not be read.
    Io = 2,
    /// Input data was rejected (malformed corpus, empty reference, ...).
    Validation = 3,
    /// A remote endpoint failed.
    Upstream = 4,
    /// A sample, entity set or embedding was not found.
    NotFound = 5,
    /// A panic was caught at the boundary.
    Internal = 99,
}

/// Scores of one prediction against its reference.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SelshotScores {
    pub bleu: f64,
    pub rouge_l: f64,
    pub meteor: f64,
}

/// Opaque corpus handle.
pub struct SelshotCorpus {
    corpus: Corpus,
}

/// Opaque selector handle. Owns its corpus copy and features so that it
/// outlives the corpus handle it was built from.
pub struct SelshotSelector {
    corpus: Corpus,
    config: SelectionConfig,
    entities: HashMap<String, EntitySet>,
    embeddings: HashMap<String, EmbeddingVector>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SelshotStatus, String);

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure(SelshotStatus::InvalidArgument, message.into())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_upstream() {
            SelshotStatus::Upstream
        } else {
            match &e {
                Error::Corpus(CorpusError::Io { .. }) | Error::Embedding(EmbeddingError::File { .. }) => {
                    SelshotStatus::Io
                }
                Error::Similarity(
                    SimilarityError::MissingEmbedding(_) | SimilarityError::MissingEntitySet(_),
                ) => SelshotStatus::NotFound,
                Error::Similarity(SimilarityError::InvalidK | SimilarityError::InvalidWeight(_)) => {
                    SelshotStatus::InvalidArgument
                }
                _ => SelshotStatus::Validation,
            }
        };
        Failure(status, e.to_string())
    }
}

macro_rules! impl_failure_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}

impl_failure_from!(CorpusError, EmbeddingError, MetricError, SimilarityError, selshot::entity::EntityError);

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SelshotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SelshotStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {message}"));
            SelshotStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::invalid(format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{name} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::invalid(format!("{name} is null")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::invalid(format!("{name} is null")))
}

fn json_out(out: &mut *mut c_char, value: &serde_json::Value) {
    let text = serde_json::to_string(value).expect("serializing a JSON value");
    *out = CString::new(text).expect("JSON has no NUL bytes").into_raw();
}

fn parse_language(s: &str) -> Result<Language, Failure> {
    s.parse().map_err(|e: String| Failure::invalid(e))
}

/// Message of the last failed call on this thread, or null if none. Valid
/// until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn selshot_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn selshot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned through an `out_json` parameter. Null is a no-op.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn selshot_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a JSONL corpus.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn selshot_corpus_load(path: *const c_char, out: *mut *mut SelshotCorpus) -> SelshotStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let corpus = Corpus::ingest(path)?;
        *out = Box::into_raw(Box::new(SelshotCorpus { corpus }));
        Ok(())
    })
}

/// Number of samples, all splits included. 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn selshot_corpus_len(corpus: *const SelshotCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.corpus.len())
}

/// # Safety
/// `corpus` must be null or a handle from [`selshot_corpus_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn selshot_corpus_free(corpus: *mut SelshotCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

fn entities_json(set: &EntitySet) -> serde_json::Value {
    serde_json::to_value(set).expect("entity sets serialize")
}

/// Extracts entities with the local lexical extractor. `language` is
/// `"python"` or `"java"`. Writes a JSON object mapping entity type to a
/// sorted list of surface forms.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn selshot_extract_entities(
    code: *const c_char,
    language: *const c_char,
    out_json: *mut *mut c_char,
) -> SelshotStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        *out = ptr::null_mut();
        let code = str_arg(code, "code")?;
        let language = parse_language(str_arg(language, "language")?)?;
        let set = LocalLexical::new().extract(code, language)?;
        json_out(out, &entities_json(&set));
        Ok(())
    })
}

/// Token-Jaccard similarity of two snippets.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn selshot_score_token(
    a: *const c_char,
    b: *const c_char,
    language: *const c_char,
    out: *mut f64,
) -> SelshotStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let language = parse_language(str_arg(language, "language")?)?;
        let sample = |id: &str, code: &str| selshot::corpus::CodeSample::new(id, code, "", language, Split::Test);
        let qa = sample("a", str_arg(a, "a")?);
        let qb = sample("b", str_arg(b, "b")?);
        *out = score_token(&qa, &qb, &Tokenizer::for_language(language))?.value;
        Ok(())
    })
}

/// BLEU, ROUGE-L and METEOR of `prediction` against `reference`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn selshot_metric_scores(
    prediction: *const c_char,
    reference: *const c_char,
    out: *mut SelshotScores,
) -> SelshotStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s = score_pair(str_arg(prediction, "prediction")?, str_arg(reference, "reference")?)?;
        *out = SelshotScores {
            bleu: s.bleu,
            rouge_l: s.rouge_l,
            meteor: s.meteor,
        };
        Ok(())
    })
}

/// Builds a selector over the train split of `corpus`.
///
/// `strategy` is `"token"`, `"semantic"` or `"ner"`. Entity sets for `ner`
/// come from the local lexical extractor. `semantic` needs
/// `embeddings_path`, a JSONL file of `{"id", "values"}` lines covering
/// every train sample; it is ignored by the other strategies and may be
/// null. The selector copies what it needs, so `corpus` may be freed first.
///
/// # Safety
/// `corpus` must be a live handle, strings NUL-terminated or null where
/// allowed, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn selshot_selector_new(
    corpus: *const SelshotCorpus,
    strategy: *const c_char,
    k: usize,
    embeddings_path: *const c_char,
    out: *mut *mut SelshotSelector,
) -> SelshotStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let corpus = handle(corpus, "corpus")?.corpus.clone();
        let strategy: Strategy = str_arg(strategy, "strategy")?.parse().map_err(Failure::invalid)?;
        let config = SelectionConfig::new(strategy, k)?.with_weights(EntityWeights::default());
        let train: Vec<_> = corpus.split(Split::Train).collect();
        let mut entities = HashMap::new();
        let mut embeddings = HashMap::new();
        match strategy {
            Strategy::Token => {}
            Strategy::Ner => {
                let extractor = LocalLexical::new();
                for s in &train {
                    entities.insert(s.id.clone(), extractor.extract(&s.code, s.language)?);
                }
            }
            Strategy::Semantic => {
                let path = opt_str_arg(embeddings_path, "embeddings_path")?
                    .ok_or_else(|| Failure::invalid("semantic selection needs embeddings_path"))?;
                let provider = PrecomputedFile::load(Path::new(path), None)?;
                for s in &train {
                    embeddings.insert(s.id.clone(), provider.embed(s)?);
                }
            }
        }
        *out = Box::into_raw(Box::new(SelshotSelector {
            corpus,
            config,
            entities,
            embeddings,
        }));
        Ok(())
    })
}

impl SelshotSelector {
    fn rank(&self, query_id: &str, input: QueryInput<'_>) -> Result<Vec<RankedExample>, Failure> {
        let features = Features {
            entities: Some(&self.entities),
            embeddings: Some(&self.embeddings),
        };
        let selector = Selector::new(&self.corpus, self.config, features)?;
        Ok(selector.rank_by(query_id, input)?)
    }
}

fn ranking_json(ranked: &[RankedExample]) -> serde_json::Value {
    ranked
        .iter()
        .map(|r| {
            serde_json::json!({
                "rank": r.rank,
                "id": r.sample.id,
                "score": r.score.value,
                "code": r.sample.code,
                "explanation": r.sample.explanation,
            })
        })
        .collect()
}

/// Ranks train samples against a query given as code.
///
/// Candidates whose id equals `query_id` are skipped; pass null when the
/// query is not part of the corpus. For the `semantic` strategy the query
/// embedding is looked up by `query_id` in the selector's embeddings, so
/// `query_id` is required there (or use [`selshot_selector_rank_vector`]).
/// Writes a JSON array of `{rank, id, score, code, explanation}`.
///
/// # Safety
/// `selector` must be a live handle, strings NUL-terminated or null where
/// allowed, `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn selshot_selector_rank(
    selector: *const SelshotSelector,
    query_code: *const c_char,
    query_id: *const c_char,
    out_json: *mut *mut c_char,
) -> SelshotStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        *out = ptr::null_mut();
        let sel = handle(selector, "selector")?;
        let code = str_arg(query_code, "query_code")?;
        let id = opt_str_arg(query_id, "query_id")?;
        let id_or_blank = id.unwrap_or("");
        let ranked = match sel.config.strategy {
            Strategy::Token => sel.rank(id_or_blank, QueryInput::Code(code))?,
            Strategy::Ner => {
                let set = LocalLexical::new().extract(code, sel.corpus.language())?;
                sel.rank(id_or_blank, QueryInput::Entities(&set))?
            }
            Strategy::Semantic => {
                let id = id.ok_or_else(|| Failure::invalid("semantic ranking by code needs query_id"))?;
                let v = sel
                    .embeddings
                    .get(id)
                    .ok_or_else(|| Failure::from(SimilarityError::MissingEmbedding(id.to_string())))?;
                sel.rank(id, QueryInput::Embedding(v))?
            }
        };
        json_out(out, &ranking_json(&ranked));
        Ok(())
    })
}

/// Ranks train samples against an explicit query embedding. Only valid for
/// the `semantic` strategy.
///
/// # Safety
/// `selector` must be a live handle, `values` must point to `len` floats,
/// `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn selshot_selector_rank_vector(
    selector: *const SelshotSelector,
    values: *const f32,
    len: usize,
    out_json: *mut *mut c_char,
) -> SelshotStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        *out = ptr::null_mut();
        let sel = handle(selector, "selector")?;
        if sel.config.strategy != Strategy::Semantic {
            return Err(Failure::invalid("rank_vector needs a semantic selector"));
        }
        if values.is_null() || len == 0 {
            return Err(Failure::invalid("values is null or empty"));
        }
        let v = EmbeddingVector::new(std::slice::from_raw_parts(values, len).to_vec(), "ffi")?;
        let ranked = sel.rank("", QueryInput::Embedding(&v))?;
        json_out(out, &ranking_json(&ranked));
        Ok(())
    })
}

/// # Safety
/// `selector` must be null or a handle from [`selshot_selector_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn selshot_selector_free(selector: *mut SelshotSelector) {
    if !selector.is_null() {
        drop(Box::from_raw(selector));
    }
}
