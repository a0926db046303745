//! Pipeline orchestration behind the CLI subcommands.

mod commands;
mod compare;
mod run;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Intent;
use crate::entity::BackendKind;
use crate::llm::{ApiStyle, ModelTarget};
use crate::prompting::TemplateFamily;
use crate::similarity::{EntityWeights, Strategy};

pub use commands::{
    cmd_embed, cmd_extract, cmd_ingest, cmd_rank, cmd_stats, FeatureSources, IngestSummary, RankQuery, RankRow, RankTable,
};
pub use compare::{cmd_compare, compare_reports, gain_percent, Comparison, MetricComparison};
pub use run::{cmd_run, gateway_for, run_with, GenerationRecord, RunOutcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {reason}")]
    Config { path: String, reason: String },
    #[error("reports cover different samples: {detail}")]
    SampleSetMismatch { detail: String },
    #[error("no sample with id {0}")]
    UnknownSample(String),
    #[error("the selected corpus has no test samples")]
    NoTestSamples,
}

impl HarnessError {
    pub fn is_upstream(&self) -> bool {
        false
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// How demonstrations are chosen for a run: one of the similarity
/// strategies, none at all, or uniformly at random.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStrategy {
    ZeroShot,
    Random,
    Token,
    Semantic,
    Ner,
}

impl RunStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStrategy::ZeroShot => "zero-shot",
            RunStrategy::Random => "random",
            RunStrategy::Token => "token",
            RunStrategy::Semantic => "semantic",
            RunStrategy::Ner => "ner",
        }
    }

    pub fn similarity(self) -> Option<Strategy> {
        match self {
            RunStrategy::Token => Some(Strategy::Token),
            RunStrategy::Semantic => Some(Strategy::Semantic),
            RunStrategy::Ner => Some(Strategy::Ner),
            RunStrategy::ZeroShot | RunStrategy::Random => None,
        }
    }
}

impl fmt::Display for RunStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero-shot" => Ok(RunStrategy::ZeroShot),
            "random" => Ok(RunStrategy::Random),
            other => other.parse::<Strategy>().map(|s| match s {
                Strategy::Token => RunStrategy::Token,
                Strategy::Semantic => RunStrategy::Semantic,
                Strategy::Ner => RunStrategy::Ner,
            }),
        }
    }
}

/// Everything a run needs. Loadable from a TOML file whose keys are the
/// field names; CLI flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub corpus: PathBuf,
    pub strategy: RunStrategy,
    pub k: usize,
    /// Seed of the `random` strategy.
    pub seed: u64,
    pub model: String,
    pub endpoint: String,
    /// Required unless the model name implies it.
    pub family: Option<TemplateFamily>,
    pub api: ApiStyle,
    pub intent: Option<Intent>,
    pub output_dir: PathBuf,
    pub cache_dir: PathBuf,
    /// Extract entities / compute embeddings for samples missing from the
    /// caches instead of failing.
    pub auto_populate: bool,
    /// Requests in flight at once.
    pub concurrency: usize,
    pub entity_backend: BackendKind,
    /// NER model for the remote entity backend.
    pub ner_model: Option<String>,
    /// Defaults to `endpoint`.
    pub ner_endpoint: Option<String>,
    pub ner_api: ApiStyle,
    /// JSONL file of precomputed embeddings.
    pub embeddings_file: Option<PathBuf>,
    /// Full URL of an embedding endpoint, used when no file is given.
    pub embedding_endpoint: Option<String>,
    pub embedding_model: Option<String>,
    /// Entity weight overrides, e.g. `class=2,function=0.5`.
    pub weights: Option<String>,
    /// Reject inputs containing template delimiters instead of escaping them.
    pub strict_prompts: bool,
    pub intent_hints: bool,
    /// Custom template file with `{examples}` and `{code}` placeholders.
    pub template: Option<PathBuf>,
    /// Only the first N test samples.
    pub limit: Option<usize>,
    pub timeout_secs: u64,
    pub retry_base_delay_ms: u64,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            corpus: PathBuf::new(),
            strategy: RunStrategy::Ner,
            k: 10,
            seed: 0,
            model: String::new(),
            endpoint: String::new(),
            family: None,
            api: ApiStyle::Completion,
            intent: None,
            output_dir: PathBuf::from("runs"),
            cache_dir: PathBuf::from(".selshot-cache"),
            auto_populate: true,
            concurrency: 4,
            entity_backend: BackendKind::LocalLexical,
            ner_model: None,
            ner_endpoint: None,
            ner_api: ApiStyle::Chat,
            embeddings_file: None,
            embedding_endpoint: None,
            embedding_model: None,
            weights: None,
            strict_prompts: false,
            intent_hints: false,
            template: None,
            limit: None,
            timeout_secs: 60,
            retry_base_delay_ms: 500,
        }
    }
}

impl RunSpec {
    pub fn from_toml_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|reason| HarnessError::Config {
            path: path.display().to_string(),
            reason,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn model_target(&self) -> Result<ModelTarget, HarnessError> {
        let family = self
            .family
            .or_else(|| TemplateFamily::for_model(&self.model))
            .ok_or_else(|| {
                HarnessError::InvalidSpec(format!(
                    "no template family known for model `{}`; set `family`",
                    self.model
                ))
            })?;
        Ok(ModelTarget {
            name: self.model.clone(),
            endpoint: self.endpoint.clone(),
            family,
            api: self.api,
        })
    }

    pub fn entity_weights(&self) -> Result<EntityWeights, HarnessError> {
        match &self.weights {
            Some(w) => EntityWeights::parse_overrides(w).map_err(HarnessError::InvalidSpec),
            None => Ok(EntityWeights::default()),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidSpec(m));
        if self.corpus.as_os_str().is_empty() {
            return bad("corpus path is required".into());
        }
        if !self.corpus.is_file() {
            return bad(format!("corpus {} does not exist", self.corpus.display()));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.model.is_empty() || self.endpoint.is_empty() {
            return bad("model and endpoint are required".into());
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1".into());
        }
        self.model_target()?;
        self.entity_weights()?;
        if let Some(t) = &self.template {
            if !t.is_file() {
                return bad(format!("template {} does not exist", t.display()));
            }
        }
        if self.strategy == RunStrategy::Semantic {
            match (&self.embeddings_file, &self.embedding_endpoint) {
                (Some(f), _) if !f.is_file() => return bad(format!("embeddings file {} does not exist", f.display())),
                (None, None) if self.auto_populate => {
                    return bad("semantic selection needs embeddings_file or embedding_endpoint".into())
                }
                _ => {}
            }
        }
        if self.strategy == RunStrategy::Ner && self.entity_backend == BackendKind::RemoteLlm && self.ner_model.is_none() {
            return bad("the remote entity backend needs ner_model".into());
        }
        Ok(())
    }

    pub fn entity_cache_path(&self) -> PathBuf {
        self.cache_dir.join("entities.jsonl")
    }

    pub fn embedding_cache_path(&self) -> PathBuf {
        self.cache_dir.join("embeddings.jsonl")
    }

    pub fn generation_cache_path(&self) -> PathBuf {
        self.cache_dir.join("generations.jsonl")
    }

    pub fn generations_log_path(&self) -> PathBuf {
        self.output_dir.join("generations.jsonl")
    }

    pub fn report_path(&self) -> PathBuf {
        self.output_dir.join("report.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_config() {
        let spec = RunSpec::from_toml_str(
            r#"
            corpus = "c.jsonl"
            strategy = "zero-shot"
            model = "codellama-34b-instruct"
            endpoint = "http://localhost:1/v1"
            intent = "how-to-use"
            k = 5
            "#,
        )
        .unwrap();
        assert_eq!(spec.strategy, RunStrategy::ZeroShot);
        assert_eq!(spec.intent, Some(Intent::HowToUse));
        assert_eq!(spec.k, 5);
        assert_eq!(spec.concurrency, 4);
        assert_eq!(spec.model_target().unwrap().family, TemplateFamily::InstWrapped);
        assert!(RunSpec::from_toml_str("nope = 1").is_err());
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("c.jsonl");
        std::fs::write(&corpus, "").unwrap();
        let mut spec = RunSpec {
            corpus: corpus.clone(),
            model: "mystery".into(),
            endpoint: "http://x".into(),
            ..RunSpec::default()
        };
        assert!(spec.validate().is_err());
        spec.family = Some(TemplateFamily::HumanAssistant);
        spec.validate().unwrap();
        spec.k = 0;
        assert!(spec.validate().is_err());
        spec.k = 1;
        spec.strategy = RunStrategy::Semantic;
        assert!(spec.validate().is_err());
        spec.weights = Some("bogus=1".into());
        spec.strategy = RunStrategy::Token;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn strategy_names() {
        for s in ["zero-shot", "random", "token", "semantic", "ner"] {
            assert_eq!(s.parse::<RunStrategy>().unwrap().as_str(), s);
        }
        assert!("bm25".parse::<RunStrategy>().is_err());
    }
}
