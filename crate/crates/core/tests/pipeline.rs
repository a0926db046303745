//! End-to-end runs against the bundled stub endpoint.

mod common;

use std::sync::Arc;

use common::{spec, synthetic_corpus, write_corpus};
use selshot::corpus::Corpus;
use selshot::entity::BackendKind;
use selshot::harness::{cmd_compare, cmd_run, gateway_for, run_with, RunStrategy};
use selshot::llm::ApiStyle;
use selshot::similarity::SimilarityError;
use selshot::stub::{StubConfig, StubServer};
use selshot::Error;

fn setup(train: usize, test: usize) -> (tempfile::TempDir, std::path::PathBuf, Corpus) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synthetic_corpus(7, train, test);
    let path = write_corpus(dir.path(), "toy.jsonl", &corpus);
    (dir, path, corpus)
}

#[test]
fn echo_stub_scores_perfectly_for_every_strategy() {
    let (dir, path, corpus) = setup(20, 5);
    let stub = StubServer::start(StubConfig::echo_reference(&corpus)).unwrap();
    for strategy in [RunStrategy::ZeroShot, RunStrategy::Random, RunStrategy::Token, RunStrategy::Ner] {
        let out = dir.path().join(strategy.as_str());
        let outcome = cmd_run(&spec(&path, &stub.base_url(), &out, strategy)).unwrap();
        let agg = outcome.report.aggregate;
        assert_eq!((agg.bleu, agg.rouge_l), (1.0, 1.0), "{strategy}");
        assert!(agg.meteor > 0.9, "{strategy}");
        assert_eq!(outcome.report.rows.len(), 5);
        assert_eq!(outcome.generated, 5);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (dir, path, corpus) = setup(20, 6);
    let stub = StubServer::start(StubConfig::nearest_demo(&corpus)).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cmd_run(&spec(&path, &stub.base_url(), &a, RunStrategy::Ner)).unwrap();
    cmd_run(&spec(&path, &stub.base_url(), &b, RunStrategy::Ner)).unwrap();
    let ra = std::fs::read(a.join("run/report.json")).unwrap();
    let rb = std::fs::read(b.join("run/report.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn interrupted_run_resumes_with_only_the_missing_samples() {
    let (dir, path, corpus) = setup(15, 4);
    let third = corpus.split(selshot::corpus::Split::Test).nth(2).unwrap().code.clone();
    let mut config = StubConfig::echo_reference(&corpus);
    config.fail_when_contains = vec![third.clone()];
    let failing = StubServer::start(config).unwrap();
    let mut s = spec(&path, &failing.base_url(), dir.path(), RunStrategy::Token);
    s.concurrency = 1;
    let err = cmd_run(&s).unwrap_err();
    assert!(err.is_upstream(), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("te002"), "{err}");
    assert!(!s.report_path().exists());

    let healthy = StubServer::start(StubConfig::echo_reference(&corpus)).unwrap();
    s.endpoint = healthy.base_url();
    let outcome = cmd_run(&s).unwrap();
    assert_eq!(healthy.generations(), 2, "te002 and te003 only");
    assert_eq!((outcome.generated, outcome.resumed), (2, 2));
    assert_eq!(outcome.report.aggregate.bleu, 1.0);

    let again = cmd_run(&s).unwrap();
    assert_eq!((again.generated, again.resumed), (0, 4));
    assert_eq!(healthy.generations(), 2);
}

#[test]
fn transient_failures_are_retried() {
    let (dir, path, corpus) = setup(10, 2);
    let mut config = StubConfig::echo_reference(&corpus);
    config.fail_first = 2;
    let stub = StubServer::start(config).unwrap();
    let mut s = spec(&path, &stub.base_url(), dir.path(), RunStrategy::ZeroShot);
    s.concurrency = 1;
    let outcome = cmd_run(&s).unwrap();
    assert_eq!(outcome.report.aggregate.bleu, 1.0);
    assert_eq!(stub.failures(), 2);
}

#[test]
fn client_errors_are_not_retried_and_count_as_upstream() {
    let (dir, path, corpus) = setup(10, 2);
    let mut config = StubConfig::echo_reference(&corpus);
    config.fail_first = 100;
    config.fail_status = 400;
    let stub = StubServer::start(config).unwrap();
    let mut s = spec(&path, &stub.base_url(), dir.path(), RunStrategy::ZeroShot);
    s.concurrency = 1;
    let err = cmd_run(&s).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert_eq!(stub.requests(), 1);
}

#[test]
fn ner_without_cache_and_without_auto_populate_fails() {
    let (dir, path, corpus) = setup(10, 2);
    let stub = StubServer::start(StubConfig::echo_reference(&corpus)).unwrap();
    let mut s = spec(&path, &stub.base_url(), dir.path(), RunStrategy::Ner);
    s.auto_populate = false;
    let err = cmd_run(&s).unwrap_err();
    assert!(
        matches!(err, Error::Similarity(SimilarityError::MissingEntitySet(_))),
        "{err:?}"
    );
    assert_eq!(err.exit_code(), 2);
    assert_eq!(stub.requests(), 0);

    // once extracted, the cache alone is enough
    s.auto_populate = true;
    cmd_run(&s).unwrap();
    s.auto_populate = false;
    std::fs::remove_dir_all(&s.output_dir).unwrap();
    cmd_run(&s).unwrap();
}

#[test]
fn semantic_strategy_with_remote_embeddings() {
    let (dir, path, corpus) = setup(12, 3);
    let stub = StubServer::start(StubConfig::echo_reference(&corpus)).unwrap();
    let mut s = spec(&path, &stub.base_url(), dir.path(), RunStrategy::Semantic);
    s.embedding_endpoint = Some(format!("{}/embeddings", stub.base_url()));
    s.embedding_model = Some("hash".into());
    let outcome = cmd_run(&s).unwrap();
    assert_eq!(outcome.report.aggregate.bleu, 1.0);
    assert_eq!(stub.embeddings(), 15);
    assert!(s.embedding_cache_path().exists());

    // cached embeddings are reused
    std::fs::remove_dir_all(&s.output_dir).unwrap();
    cmd_run(&s).unwrap();
    assert_eq!(stub.embeddings(), 15);
}

#[test]
fn remote_entity_backend_over_chat() {
    let (dir, path, corpus) = setup(8, 2);
    let stub = StubServer::start(StubConfig::echo_reference(&corpus)).unwrap();
    let mut s = spec(&path, &stub.base_url(), dir.path(), RunStrategy::Ner);
    s.entity_backend = BackendKind::RemoteLlm;
    s.ner_model = Some("universal-ner".into());
    s.ner_api = ApiStyle::Chat;
    let outcome = cmd_run(&s).unwrap();
    assert_eq!(outcome.report.aggregate.bleu, 1.0);
    // one question per normative entity type and sample, plus the generations
    assert!(stub.generations() > 10 * 2, "{}", stub.generations());
}

#[test]
fn generation_cache_avoids_repeat_calls_across_output_dirs() {
    let (dir, path, corpus) = setup(10, 3);
    let stub = StubServer::start(StubConfig::echo_reference(&corpus)).unwrap();
    let first = spec(&path, &stub.base_url(), &dir.path().join("one"), RunStrategy::Token);
    let mut second = first.clone();
    second.output_dir = dir.path().join("two");
    cmd_run(&first).unwrap();
    let gateway = Arc::new(gateway_for(&second).unwrap());
    let outcome = run_with(&second, gateway.clone()).unwrap();
    assert_eq!(stub.generations(), 3);
    assert_eq!(gateway.cache_hits(), 3);
    assert_eq!(outcome.generated, 3);
}

#[test]
fn compare_two_runs() {
    let (dir, path, corpus) = setup(20, 6);
    let echo = StubServer::start(StubConfig::echo_reference(&corpus)).unwrap();
    let fixed = StubServer::start(StubConfig::fixed("does something")).unwrap();
    let a = spec(&path, &fixed.base_url(), &dir.path().join("a"), RunStrategy::ZeroShot);
    let b = spec(&path, &echo.base_url(), &dir.path().join("b"), RunStrategy::Ner);
    cmd_run(&a).unwrap();
    cmd_run(&b).unwrap();
    let cmp = cmd_compare(&[a.report_path(), b.report_path()]).unwrap();
    let bleu = &cmp.versus_baseline[0][0];
    assert!(bleu.value > bleu.baseline);
    assert!(bleu.t_test.unwrap().t > 0.0);
    assert!(cmp.to_string().contains("[1] vs [0]"));
}

#[test]
fn runs_filtered_by_intent() {
    use selshot::corpus::Intent;
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::java_intent_corpus(&[(Intent::What, 6, 3), (Intent::Why, 4, 2)]);
    let path = write_corpus(dir.path(), "tlc.jsonl", &corpus);
    let stub = StubServer::start(StubConfig::echo_reference(&corpus)).unwrap();
    let mut s = spec(&path, &stub.base_url(), dir.path(), RunStrategy::Token);
    s.intent = Some(Intent::Why);
    let outcome = cmd_run(&s).unwrap();
    assert_eq!(outcome.report.rows.len(), 2);
    assert_eq!(outcome.report.header.intent.as_deref(), Some("why"));
    assert!(outcome.report.rows.iter().all(|r| r.id.starts_with("why-")));
}
