//! Commit message optimization: read a commit, extract code context around
//! the change, score messages with retrieval similarity and LLM judges, and
//! search for a better message.

pub mod config;
pub mod context;
pub mod diff;
pub mod llm;
pub mod optimizer;
pub mod quality;
pub mod retrieval;
pub mod scalar;

use thiserror::Error;

pub use scalar::Scalar;

/// Any failure, tagged with the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("[config] {0}")]
    Config(#[from] config::ConfigError),
    #[error("[diff] {0}")]
    Diff(#[from] diff::DiffError),
    #[error("[diff] {0}")]
    Git(#[from] diff::GitError),
    #[error("[context] {0}")]
    Context(#[from] context::ContextError),
    #[error("[retrieval] {0}")]
    Retrieval(#[from] retrieval::RetrievalError),
    #[error("[quality] {0}")]
    Quality(#[from] quality::QualityError),
    #[error("[optimizer] {0}")]
    Optimizer(#[from] optimizer::OptimizerError),
    #[error("[llm] {0}")]
    Llm(#[from] llm::LlmError),
    #[error("[io] {context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Config = config::Config<f64>;
pub type ConfigF32 = config::Config<f32>;
pub type OptimizerConfig = optimizer::OptimizerConfig<f64>;
pub type OptimizerConfigF32 = optimizer::OptimizerConfig<f32>;
pub type OptimizationResult = optimizer::OptimizationResult<f64>;
pub type OptimizationResultF32 = optimizer::OptimizationResult<f32>;
pub type QualityVector = quality::QualityVector<f64>;
pub type QualityVectorF32 = quality::QualityVector<f32>;
pub type EvaluatorWeights = quality::EvaluatorWeights<f64>;
pub type EvaluatorWeightsF32 = quality::EvaluatorWeights<f32>;
pub type Evaluator = quality::Evaluator<f64>;
pub type EvaluatorF32 = quality::Evaluator<f32>;
pub type CorpusStore = retrieval::CorpusStore<f64>;
pub type CorpusStoreF32 = retrieval::CorpusStore<f32>;
