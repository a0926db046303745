use thiserror::Error;

use crate::corpus::CorpusError;
use crate::embeddings::EmbeddingError;
use crate::entity::EntityError;
use crate::harness::HarnessError;
use crate::llm::GatewayError;
use crate::metrics::MetricError;
use crate::prompting::PromptError;
use crate::similarity::SimilarityError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Any error surfaced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Entity(#[from] EntityError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn for_sample(id: impl Into<String>, source: impl Into<Error>) -> Self {
        Error::Sample {
            id: id.into(),
            source: Box::new(source.into()),
        }
    }

    /// True when the failure came from a remote endpoint rather than from
    /// invalid input or configuration.
    pub fn is_upstream(&self) -> bool {
        match self {
            Error::Gateway(e) => e.is_upstream(),
            Error::Entity(e) => e.is_upstream(),
            Error::Embedding(e) => e.is_upstream(),
            Error::Sample { source, .. } => source.is_upstream(),
            Error::Harness(e) => e.is_upstream(),
            _ => false,
        }
    }

    /// Process exit code for the CLI: 2 for validation errors, 3 for
    /// upstream/endpoint errors.
    pub fn exit_code(&self) -> i32 {
        if self.is_upstream() {
            3
        } else {
            2
        }
    }
}
