//! File configuration with environment overrides.
//!
//! Precedence is flag > env > file > default. This module handles the last
//! three; callers apply flags on the returned value.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{DEFAULT_ISSUE_BUDGET, DEFAULT_TAXONOMY, FORGE_TOKEN_ENV, FORGE_URL_ENV};
use crate::llm::{RetryPolicy, API_KEY_ENV, BASE_URL_ENV, CACHE_DIR_ENV, MODEL_ENV};
use crate::optimizer::OptimizerConfig;
use crate::quality::{EvaluatorWeights, Metric, DEFAULT_DIFF_TOKEN_BUDGET};
use crate::retrieval::{Embedder, HashEmbedder, HttpEmbedder, RetrievalConfig, RetrievalError, DEFAULT_TOP_K};
use crate::scalar::Scalar;

/// Names the config file when no `--config` flag is given.
pub const CONFIG_ENV: &str = "CMO_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "S: Scalar"))]
pub struct Config<S> {
    pub evaluator: EvaluatorSection<S>,
    pub retrieval: RetrievalSection,
    pub optimizer: OptimizerConfig<S>,
    pub context: ContextSection,
    pub backends: BackendsSection,
    pub paths: PathsSection,
}

impl<S: Scalar> Default for Config<S> {
    fn default() -> Self {
        Config {
            evaluator: EvaluatorSection::default(),
            retrieval: RetrievalSection::default(),
            optimizer: OptimizerConfig::default(),
            context: ContextSection::default(),
            backends: BackendsSection::default(),
            paths: PathsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "S: Scalar"))]
pub struct EvaluatorSection<S> {
    pub weights: EvaluatorWeights<S>,
    /// Per-metric scorer model ids; unset ones use `backends.llm.model`.
    pub scorers: ScorerIds,
    pub diff_token_budget: usize,
}

impl<S: Scalar> Default for EvaluatorSection<S> {
    fn default() -> Self {
        EvaluatorSection {
            weights: EvaluatorWeights::default(),
            scorers: ScorerIds::default(),
            diff_token_budget: DEFAULT_DIFF_TOKEN_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerIds {
    pub rationality: Option<String>,
    pub comprehensiveness: Option<String>,
    pub conciseness: Option<String>,
    pub expressiveness: Option<String>,
}

impl ScorerIds {
    /// Model ids in metric order, `fallback` filling the gaps.
    pub fn resolve(&self, fallback: &str) -> [String; 4] {
        Metric::ALL.map(|m| {
            let id = match m {
                Metric::Rationality => &self.rationality,
                Metric::Comprehensiveness => &self.comprehensiveness,
                Metric::Conciseness => &self.conciseness,
                Metric::Expressiveness => &self.expressiveness,
            };
            id.clone().unwrap_or_else(|| fallback.to_string())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalSection {
    pub k: usize,
    /// `hash-<dim>` or `http:<model>`.
    pub diff_embedder: String,
    pub text_embedder: String,
    /// Dimension reported by `http:` embedders.
    pub http_dim: usize,
    pub corpus: Option<PathBuf>,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        let base = RetrievalConfig::default();
        RetrievalSection {
            k: DEFAULT_TOP_K,
            diff_embedder: base.diff_embedder,
            text_embedder: base.text_embedder,
            http_dim: 1536,
            corpus: None,
        }
    }
}

impl RetrievalSection {
    pub fn query_config(&self) -> RetrievalConfig {
        RetrievalConfig {
            k: self.k,
            diff_embedder: self.diff_embedder.clone(),
            text_embedder: self.text_embedder.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContextSection {
    pub taxonomy: Vec<String>,
    pub issue_budget: usize,
}

impl Default for ContextSection {
    fn default() -> Self {
        ContextSection {
            taxonomy: DEFAULT_TAXONOMY.iter().map(|s| s.to_string()).collect(),
            issue_budget: DEFAULT_ISSUE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendsSection {
    pub llm: LlmSection,
    pub forge: ForgeSection,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    #[default]
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmSection {
    pub kind: LlmKind,
    pub base_url: Option<String>,
    pub api_key: Option<String>,
    /// Model for generation, updates, summaries and classification.
    pub model: String,
    /// Script file for the mock backend.
    pub mock_script: Option<PathBuf>,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            kind: LlmKind::Http,
            base_url: None,
            api_key: None,
            model: "gpt-4".into(),
            mock_script: None,
            timeout_secs: 120,
            retry: RetryPolicy::default(),
        }
    }
}

impl LlmSection {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForgeSection {
    pub url: Option<String>,
    pub token: Option<String>,
    /// Offline issue fixtures (`<dir>/issues/<n>.json`); wins over `url`.
    pub fixture_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub cache: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl<S: Scalar> Config<S> {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let parsed = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        };
        let cfg: Self = parsed.map_err(|reason| ConfigError::Parse {
            path: origin.to_path_buf(),
            reason,
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Overrides file values with the `CMO_*` variables `env` knows.
    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) {
        let llm = &mut self.backends.llm;
        if let Some(v) = env(BASE_URL_ENV) {
            llm.base_url = Some(v);
        }
        if let Some(v) = env(API_KEY_ENV) {
            llm.api_key = Some(v);
        }
        if let Some(v) = env(MODEL_ENV) {
            llm.model = v;
        }
        if let Some(v) = env(FORGE_URL_ENV) {
            self.backends.forge.url = Some(v);
        }
        if let Some(v) = env(FORGE_TOKEN_ENV) {
            self.backends.forge.token = Some(v);
        }
        if let Some(v) = env(CACHE_DIR_ENV) {
            self.paths.cache = Some(PathBuf::from(v));
        }
    }

    /// Loads the file named by `flag` or `CMO_CONFIG` (defaults when
    /// neither is set), then applies the environment.
    pub fn resolve(flag: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let path = flag
            .map(Path::to_path_buf)
            .or_else(|| env(CONFIG_ENV).map(PathBuf::from));
        let mut cfg = match path {
            Some(p) => Self::from_file(&p)?,
            None => Self::default(),
        };
        cfg.apply_env(env);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.optimizer
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.evaluator
            .weights
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.retrieval.k == 0 {
            return Err(ConfigError::Invalid("retrieval.k must be positive".into()));
        }
        if self.context.taxonomy.is_empty() {
            return Err(ConfigError::Invalid("context.taxonomy is empty".into()));
        }
        for id in [&self.retrieval.diff_embedder, &self.retrieval.text_embedder] {
            check_embedder_id(id).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }
}

enum EmbedderSpec<'a> {
    Hash(usize),
    Http(&'a str),
}

fn check_embedder_id(id: &str) -> Result<EmbedderSpec<'_>, RetrievalError> {
    if let Some(dim) = id.strip_prefix("hash-") {
        match dim.parse::<usize>() {
            Ok(d) if d > 0 => return Ok(EmbedderSpec::Hash(d)),
            _ => {}
        }
    }
    if let Some(model) = id.strip_prefix("http:").filter(|m| !m.is_empty()) {
        return Ok(EmbedderSpec::Http(model));
    }
    Err(RetrievalError::UnknownEmbedder(id.to_string()))
}

/// Builds the embedder named by `id`. `http:` embedders talk to the
/// configured LLM base URL.
pub fn embedder_from_id<S: Scalar>(id: &str, cfg: &Config<S>) -> Result<Arc<dyn Embedder<S>>, RetrievalError> {
    Ok(match check_embedder_id(id)? {
        EmbedderSpec::Hash(dim) => Arc::new(HashEmbedder::<S>::new(dim)),
        EmbedderSpec::Http(model) => {
            let llm = &cfg.backends.llm;
            let base = llm
                .base_url
                .as_deref()
                .ok_or_else(|| RetrievalError::Embed(format!("{id}: no {BASE_URL_ENV} configured")))?;
            Arc::new(HttpEmbedder::<S>::new(
                base,
                llm.api_key.clone(),
                model,
                cfg.retrieval.http_dim,
            )?)
        }
    })
}
