use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureSources, HarnessError, RunSpec, RunStrategy};
use crate::cache::{read_jsonl, sha256_hex, AppendLog};
use crate::corpus::{CodeSample, Corpus, Split};
use crate::llm::{Gateway, GenerationParams, RetryPolicy};
use crate::metrics::{evaluate, EvalPair, EvalReport, ReportHeader, ReportRow};
use crate::prompting::{strip_output, PromptError, PromptTemplate};
use crate::similarity::{Features, RankedExample, SelectionConfig, Selector, SimilarityError, SimilarityScore, Strategy};
use crate::Error;

/// One line of a run's generations log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub id: String,
    /// Hash of the rendered prompt; a record is reused only for the same
    /// prompt.
    pub prompt_sha256: String,
    pub raw: String,
    pub prediction: String,
    /// The generation had nothing left after post-processing.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvalReport,
    /// Samples sent to the model in this invocation.
    pub generated: usize,
    /// Samples whose generation was taken from the log of an earlier run.
    pub resumed: usize,
    pub warnings: Vec<String>,
}

/// A record, whether it was generated in this invocation, and its warnings.
type Generated = (GenerationRecord, bool, Vec<String>);

/// Gateway configured from a `RunSpec`, with the generation cache under the
/// cache directory.
pub fn gateway_for(spec: &RunSpec) -> Result<Gateway, Error> {
    Ok(Gateway::with_timeout(Duration::from_secs(spec.timeout_secs.max(1)))
        .retry_policy(RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(spec.retry_base_delay_ms),
        })
        .cache_file(&spec.generation_cache_path())?)
}

/// rank → render → generate → strip → score for every test sample.
///
/// Generations are appended to `<output_dir>/generations.jsonl` as they
/// arrive, so an interrupted run picks up where it stopped. The report is
/// written to `<output_dir>/report.json`.
pub fn cmd_run(spec: &RunSpec) -> Result<RunOutcome, Error> {
    spec.validate()?;
    let gateway = Arc::new(gateway_for(spec)?);
    run_with(spec, gateway)
}

/// [`cmd_run`] with a caller-supplied gateway.
pub fn run_with(spec: &RunSpec, gateway: Arc<Gateway>) -> Result<RunOutcome, Error> {
    spec.validate()?;
    let target = spec.model_target()?;
    let corpus = Corpus::ingest(&spec.corpus)?;
    let corpus = match spec.intent {
        Some(intent) => corpus.filter_by_intent(intent)?.into_corpus()?,
        None => corpus,
    };
    let mut tests: Vec<&CodeSample> = corpus.split(Split::Test).collect();
    if let Some(limit) = spec.limit {
        tests.truncate(limit);
    }
    if tests.is_empty() {
        return Err(HarnessError::NoTestSamples.into());
    }
    let template = match &spec.template {
        Some(path) => PromptTemplate::from_file(target.family, path)?,
        None => PromptTemplate::builtin(target.family),
    }
    .with_intent_hints(spec.intent_hints);

    let sources = FeatureSources::from_spec(spec, gateway.clone());
    let all: Vec<&CodeSample> = corpus.samples().iter().collect();
    let (entities, embeddings) = match spec.strategy {
        RunStrategy::Ner => (sources.entities(&all)?.0, HashMap::new()),
        RunStrategy::Semantic => (HashMap::new(), sources.embeddings(&all)?.0),
        _ => (HashMap::new(), HashMap::new()),
    };
    let features = Features {
        entities: Some(&entities),
        embeddings: Some(&embeddings),
    };
    let selector = match spec.strategy.similarity() {
        Some(strategy) => {
            let config = SelectionConfig::new(strategy, spec.k)?.with_weights(spec.entity_weights()?);
            Some(Selector::new(&corpus, config, features)?)
        }
        None => None,
    };
    let train: Vec<&CodeSample> = corpus.split(Split::Train).collect();
    if spec.strategy == RunStrategy::Random && train.is_empty() {
        return Err(SimilarityError::EmptyTrainSplit.into());
    }

    let select = |q: &CodeSample| -> Result<Vec<RankedExample>, Error> {
        match (&selector, spec.strategy) {
            (Some(sel), _) => Ok(sel.rank(q, features)?),
            (None, RunStrategy::Random) => Ok(random_examples(q, &train, spec.k, spec.seed)),
            _ => Ok(Vec::new()),
        }
    };

    let log_path = spec.generations_log_path();
    let previous: HashMap<String, GenerationRecord> = read_jsonl::<GenerationRecord>(&log_path, true)
        .map_err(|e| HarnessError::io(&log_path, e))?
        .into_iter()
        .map(|r| (r.id.clone(), r))
        .collect();
    let log = AppendLog::open(&log_path).map_err(|e| HarnessError::io(&log_path, e))?;
    let params = GenerationParams::code_llm();
    let abort = AtomicBool::new(false);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.concurrency.max(1))
        .build()
        .expect("building the run pool");
    let results: Vec<Result<Option<Generated>, Error>> = pool.install(|| {
        tests
            .par_iter()
            .map(|q| {
                if abort.load(Ordering::SeqCst) {
                    return Ok(None);
                }
                let outcome = (|| -> Result<_, Error> {
                    let examples = select(q)?;
                    let bundle = template.render(q, &examples, spec.strict_prompts)?;
                    let mut warnings = bundle.warnings;
                    let prompt_sha256 = sha256_hex(&bundle.text);
                    if let Some(prev) = previous.get(&q.id).filter(|r| r.prompt_sha256 == prompt_sha256) {
                        return Ok(Some((prev.clone(), false, warnings)));
                    }
                    let raw = gateway.generate(&bundle.text, &target, &params)?;
                    let (prediction, empty) = match strip_output(&raw) {
                        Ok(p) => (p, false),
                        Err(PromptError::EmptyGeneration) => {
                            let w = format!("sample {}: empty generation, scored as an empty prediction", q.id);
                            log::warn!("{w}");
                            warnings.push(w);
                            (String::new(), true)
                        }
                        Err(e) => return Err(e.into()),
                    };
                    let record = GenerationRecord {
                        id: q.id.clone(),
                        prompt_sha256,
                        raw,
                        prediction,
                        empty,
                    };
                    log.append(&record).map_err(|e| HarnessError::io(log.path(), e))?;
                    Ok(Some((record, true, warnings)))
                })();
                outcome.map_err(|e| {
                    abort.store(true, Ordering::SeqCst);
                    Error::for_sample(&q.id, e)
                })
            })
            .collect()
    });

    let mut records = Vec::with_capacity(tests.len());
    let (mut generated, mut resumed) = (0, 0);
    let mut warnings = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(Some((record, fresh, w))) => {
                if fresh {
                    generated += 1;
                } else {
                    resumed += 1;
                }
                warnings.extend(w);
                records.push(record);
            }
            Ok(None) => {}
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }

    let pairs: Vec<EvalPair> = tests
        .iter()
        .zip(&records)
        .map(|(q, r)| EvalPair {
            id: q.id.clone(),
            generated: r.prediction.clone(),
            reference: q.explanation.clone(),
        })
        .collect();
    let evaluation = evaluate(&pairs)?;
    let rows = pairs
        .into_iter()
        .zip(evaluation.rows)
        .map(|(p, s)| ReportRow {
            id: p.id,
            prediction: p.generated,
            reference: p.reference,
            scores: s.scores,
        })
        .collect();
    let corpus_name = spec
        .corpus
        .file_name()
        .map_or_else(|| spec.corpus.display().to_string(), |n| n.to_string_lossy().into_owned());
    let k = if spec.strategy == RunStrategy::ZeroShot { 0 } else { spec.k };
    let mut header = ReportHeader::new(spec.strategy.as_str(), &target.name, corpus_name, k, target.family.as_str());
    header.intent = spec.intent.map(|i| i.as_str().to_string());
    let report = EvalReport::new(header, rows);
    let report_path = spec.report_path();
    report.save(&report_path).map_err(|e| HarnessError::io(&report_path, e))?;
    Ok(RunOutcome {
        report,
        generated,
        resumed,
        warnings,
    })
}

/// Up to `k` distinct train samples other than the query, drawn with a
/// generator seeded by `seed` and the query id.
fn random_examples(query: &CodeSample, train: &[&CodeSample], k: usize, seed: u64) -> Vec<RankedExample> {
    let pool: Vec<&CodeSample> = train.iter().copied().filter(|s| s.id != query.id).collect();
    let digest = sha256_hex(&query.id);
    let id_seed = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ id_seed);
    rand::seq::index::sample(&mut rng, pool.len(), k.min(pool.len()))
        .into_iter()
        .enumerate()
        .map(|(i, idx)| RankedExample {
            sample: pool[idx].clone(),
            // random picks carry no similarity
            score: SimilarityScore {
                value: 0.0,
                strategy: Strategy::Token,
            },
            rank: i + 1,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Language;

    #[test]
    fn random_examples_are_seeded_and_exclude_the_query() {
        let samples: Vec<CodeSample> = (0..20)
            .map(|i| CodeSample::new(format!("t{i}"), format!("f{i}()"), "e", Language::Python, Split::Train))
            .collect();
        let train: Vec<&CodeSample> = samples.iter().collect();
        let q = samples[3].clone();
        let a = random_examples(&q, &train, 5, 1);
        let b = random_examples(&q, &train, 5, 1);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.iter().all(|e| e.sample.id != "t3"));
        assert_ne!(a, random_examples(&q, &train, 5, 2));
        assert_eq!(random_examples(&q, &train, 50, 1).len(), 19);
    }
}
