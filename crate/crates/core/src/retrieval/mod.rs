//! High-quality exemplar corpus and the retrieval-based similarity score.

mod corpus;
mod embed;
mod query;
mod vector;
mod what_why;

use thiserror::Error;

use crate::llm::LlmError;

pub use corpus::{
    build_corpus, read_corpus_inputs, write_corpus_inputs, BuildOptions, BuildReport, CorpusEntry, CorpusHeader,
    CorpusInput, CorpusMeta, CorpusStore, CORPUS_FORMAT, CORPUS_VERSION,
};
pub use embed::{Embedder, HashEmbedder, HttpEmbedder};
pub use query::{query_by_embedding, query_similar, sim_score, Exemplar, RetrievalConfig, Retrieved, DEFAULT_TOP_K};
pub use vector::{UnitVector, NORM_TOLERANCE};
pub use what_why::{
    classify_what_why, LlmWhatWhyClassifier, RuleClassifier, WhatWhy, WhatWhyClassifier, WhatWhyVerdict,
};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no retrieved entries to score against")]
    EmptyRetrieval,
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("vector norm {norm} is not 1")]
    NotUnitNorm { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("{slot} embedder mismatch: corpus built with `{expected}`, got `{got}`")]
    EmbedderMismatch {
        slot: &'static str,
        expected: String,
        got: String,
    },
    #[error("{origin}:{line}: {reason}")]
    CorpusFormat {
        origin: String,
        line: usize,
        reason: String,
    },
    #[error("corpus entry {entry_id}: stored diff fingerprint does not match its diff text")]
    FingerprintMismatch { entry_id: String },
    #[error("unknown embedder id `{0}`")]
    UnknownEmbedder(String),
    #[error("embedding failed: {0}")]
    Embed(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Backend(#[from] LlmError),
}
