use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ContextError, ContextItem, ContextKind, Locator, Provenance};
use crate::llm::{ChatMessage, ChatRequest, LlmClient, LlmError};
use crate::quality::truncate_head;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Method,
    Class,
}

impl UnitKind {
    fn context_kind(self) -> ContextKind {
        match self {
            UnitKind::Method => ContextKind::MethodBodySummary,
            UnitKind::Class => ContextKind::ClassBodySummary,
        }
    }
}

/// Summarizes a method or class body in a sentence or two.
pub trait Summarizer: Send + Sync {
    fn summarize(&self, qualified_name: &str, source: &str, kind: UnitKind) -> Result<String, LlmError>;
}

/// Summaries from a chat model at temperature 0, so the client cache makes
/// repeated requests free.
pub struct LlmSummarizer {
    client: Arc<LlmClient>,
    model: String,
    token_budget: usize,
}

impl LlmSummarizer {
    pub fn new(client: Arc<LlmClient>, model: impl Into<String>) -> Self {
        LlmSummarizer {
            client,
            model: model.into(),
            token_budget: crate::quality::DEFAULT_DIFF_TOKEN_BUDGET,
        }
    }

    pub fn request(&self, qualified_name: &str, source: &str, kind: UnitKind) -> ChatRequest {
        let (source, _) = truncate_head(source, self.token_budget);
        let what = match kind {
            UnitKind::Method => "method",
            UnitKind::Class => "class",
        };
        ChatRequest::new(
            self.model.clone(),
            vec![
                ChatMessage::system(format!(
                    "Summarize what the given Java {what} does in one or two sentences. \
                     Reply with the summary only."
                )),
                ChatMessage::user(format!("{what} {qualified_name}:\n{source}")),
            ],
        )
        .with_max_tokens(128)
    }
}

impl Summarizer for LlmSummarizer {
    fn summarize(&self, qualified_name: &str, source: &str, kind: UnitKind) -> Result<String, LlmError> {
        let resp = self.client.chat(&self.request(qualified_name, source, kind))?;
        Ok(resp.content.trim().to_string())
    }
}

/// A summary item: `"{qualified_name}: {summary}"`.
pub fn summarize_unit(
    qualified_name: &str,
    unit_source: &str,
    kind: UnitKind,
    summarizer: &dyn Summarizer,
    locator: Option<Locator>,
) -> Result<ContextItem, ContextError> {
    if unit_source.trim().is_empty() {
        return Err(ContextError::EmptyUnit {
            name: qualified_name.to_string(),
        });
    }
    let summary = summarizer
        .summarize(qualified_name, unit_source, kind)
        .map_err(|source| ContextError::Backend {
            unit: qualified_name.to_string(),
            source,
        })?;
    Ok(ContextItem {
        kind: kind.context_kind(),
        payload: format!("{qualified_name}: {summary}"),
        locator,
        provenance: Provenance::new("summarize_unit").with("unit", qualified_name),
    })
}
