//! Software-context extraction: a per-project symbol index and the
//! extractors producing the context items injected into update prompts.

mod commit_type;
mod extract;
mod files;
mod index;
mod issues;
pub mod java;
mod pipeline;
mod summarize;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use commit_type::{
    classify_commit_type, classify_commit_type_with_retry, parse_commit_type, CommitType, CommitTypeClassifier,
    DEFAULT_TAXONOMY,
};
pub use extract::{extract_callee_knowledge, extract_enclosing_blocks, extract_variable_types, ChangedRegion};
pub use files::{is_test_path, rank_important_files};
pub use index::{
    build_project_index, build_project_index_with, DeclCounts, Diagnostic, Frontend, IndexedFile, JavaFrontend,
    MethodRef, ProjectIndex,
};
pub use issues::{
    find_issue_refs, link_issue_or_pr, FixtureForge, ForgeClient, ForgeError, HttpForge, Issue, DEFAULT_ISSUE_BUDGET,
    FORGE_TOKEN_ENV, FORGE_URL_ENV,
};
pub use java::Span;
pub use pipeline::{extract_contexts, index_commit, ContextDeps, ContextSet};
pub use summarize::{summarize_unit, LlmSummarizer, Summarizer, UnitKind};

use crate::diff::{GitError, Side};
use crate::llm::LlmError;

/// The kinds of software context the tools produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContextKind {
    ImportantFileInfo,
    CommitType,
    PullRequestIssueReport,
    MethodBodySummary,
    ClassBodySummary,
    EnclosingCodeBlock,
    CalleeKnowledge,
    VariableDataType,
}

impl ContextKind {
    pub const ALL: [ContextKind; 8] = [
        ContextKind::ImportantFileInfo,
        ContextKind::CommitType,
        ContextKind::PullRequestIssueReport,
        ContextKind::MethodBodySummary,
        ContextKind::ClassBodySummary,
        ContextKind::EnclosingCodeBlock,
        ContextKind::CalleeKnowledge,
        ContextKind::VariableDataType,
    ];

    /// Kinds the optimizer may add one at a time, in expansion order.
    /// CommitType is always given to the updater directly.
    pub const INJECTABLE: [ContextKind; 7] = [
        ContextKind::ImportantFileInfo,
        ContextKind::PullRequestIssueReport,
        ContextKind::MethodBodySummary,
        ContextKind::ClassBodySummary,
        ContextKind::EnclosingCodeBlock,
        ContextKind::CalleeKnowledge,
        ContextKind::VariableDataType,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ContextKind::ImportantFileInfo => "important_file_info",
            ContextKind::CommitType => "commit_type",
            ContextKind::PullRequestIssueReport => "pull_request_issue_report",
            ContextKind::MethodBodySummary => "method_body_summary",
            ContextKind::ClassBodySummary => "class_body_summary",
            ContextKind::EnclosingCodeBlock => "enclosing_code_block",
            ContextKind::CalleeKnowledge => "callee_knowledge",
            ContextKind::VariableDataType => "variable_data_type",
        }
    }

    /// Heading used when the context is shown to a model.
    pub fn title(self) -> &'static str {
        match self {
            ContextKind::ImportantFileInfo => "Important file information",
            ContextKind::CommitType => "Commit type",
            ContextKind::PullRequestIssueReport => "Pull request / issue report",
            ContextKind::MethodBodySummary => "Summaries of changed methods",
            ContextKind::ClassBodySummary => "Summaries of changed classes",
            ContextKind::EnclosingCodeBlock => "Enclosing code blocks",
            ContextKind::CalleeKnowledge => "Invoked methods",
            ContextKind::VariableDataType => "Variable data types",
        }
    }

    pub fn is_injectable(self) -> bool {
        self != ContextKind::CommitType
    }

    /// Kinds whose items must carry a locator.
    pub fn is_code_anchored(self) -> bool {
        matches!(
            self,
            ContextKind::EnclosingCodeBlock
                | ContextKind::CalleeKnowledge
                | ContextKind::VariableDataType
                | ContextKind::MethodBodySummary
                | ContextKind::ClassBodySummary
        )
    }
}

impl fmt::Display for ContextKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ContextKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_lowercase();
        ContextKind::ALL
            .into_iter()
            .find(|k| k.name().replace('_', "") == norm)
            .ok_or_else(|| format!("unknown context kind `{s}`"))
    }
}

/// File position an item was taken from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Locator {
    pub path: String,
    pub side: Side,
    pub span: Span,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub extractor: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(extractor: &str) -> Self {
        Provenance {
            extractor: extractor.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextItem {
    pub kind: ContextKind,
    pub payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locator: Option<Locator>,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("no enclosing block for the change at {path}:{line}")]
    NoEnclosingBlock { path: String, line: u32 },
    #[error("unit `{name}` has no source text")]
    EmptyUnit { name: String },
    #[error("diff has no files")]
    EmptyDiff,
    #[error("response matches no commit-type label: {response:?}")]
    UnparseableLabel { response: String },
    #[error("backend failed for `{unit}`: {source}")]
    Backend { unit: String, source: LlmError },
    #[error("forge unreachable: {0}")]
    ForgeUnreachable(String),
    #[error(transparent)]
    Git(#[from] GitError),
}
