//! Few-shot demonstration selection for LLM code explanation.
//!
//! The crate covers the whole pipeline: corpus ingestion, three
//! demonstration-selection strategies (token Jaccard, embedding cosine and
//! entity-weighted Jaccard), prompt rendering, calls to OpenAI-compatible
//! generation endpoints and scoring of the generated explanations with
//! BLEU, ROUGE-L and METEOR.
//!
//! ```
//! use selshot::corpus::Language;
//! use selshot::entity::{EntityType, LocalLexical, EntityExtractor};
//!
//! let entities = LocalLexical::new().extract("print(os.listdir(dname))", Language::Python).unwrap();
//! assert!(entities.get(EntityType::LIBRARY).contains("os"));
//! ```

pub mod cache;
pub mod corpus;
pub mod embeddings;
pub mod entity;
mod error;
pub mod harness;
pub mod lexer;
pub mod llm;
pub mod metrics;
pub mod prompting;
pub mod similarity;
pub mod stub;
pub mod tokenize;

pub use error::{Error, Result};
