//! Best-first search over commit message candidates: each step expands the
//! best candidate once per context kind it has not yet seen, and the search
//! stops when gains fall under a decaying threshold.

mod prompt;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::ContextKind;
use crate::llm::LlmError;
use crate::quality::{QualityError, QualityVector};
use crate::retrieval::RetrievalError;
use crate::scalar::Scalar;

pub use prompt::{
    bundle_contexts, generate_initial_message, initial_message_request, update_prompt, ContextBundle, LlmUpdater,
    MessageUpdater, UpdateRequest, DEFAULT_BUNDLE_BUDGET, DEFAULT_FORMAT_TEMPLATE, EXEMPLAR_DIFF_TOKENS,
    GIT_DIFF_DEFINITION,
};
pub use search::{optimize, update_candidate, ChildMessage, OptimizeDeps, TraceEvent, TraceEventKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "S: Scalar"))]
pub struct OptimizerConfig<S> {
    /// Fraction of the initial score that counts as a worthwhile gain.
    pub p: S,
    pub step_limit: usize,
    pub base_temperature: f64,
    pub escalation_temperature: f64,
    /// Injectable kinds, in expansion order.
    pub kinds: Vec<ContextKind>,
    pub format_template: String,
    /// Byte budget for the concatenated items of one kind.
    pub bundle_budget: usize,
    /// Run a step's UPDATE+EVALUATE calls on the rayon pool. Results are
    /// enqueued in kind order either way.
    pub parallel: bool,
}

impl<S: Scalar> Default for OptimizerConfig<S> {
    fn default() -> Self {
        OptimizerConfig {
            p: S::lit(0.05),
            step_limit: 50,
            base_temperature: 0.0,
            escalation_temperature: 1.0,
            kinds: ContextKind::INJECTABLE.to_vec(),
            format_template: DEFAULT_FORMAT_TEMPLATE.to_string(),
            bundle_budget: DEFAULT_BUNDLE_BUDGET,
            parallel: false,
        }
    }
}

impl<S: Scalar> OptimizerConfig<S> {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: String| Err(OptimizerError::InvalidConfig(m));
        if !(self.p > S::zero() && self.p < S::one()) {
            return bad(format!("p must lie in (0, 1), got {}", self.p));
        }
        if self.step_limit == 0 {
            return bad("step_limit must be at least 1".into());
        }
        if !(self.base_temperature >= 0.0 && self.escalation_temperature >= self.base_temperature) {
            return bad(format!(
                "temperatures must satisfy 0 <= base ({}) <= escalation ({})",
                self.base_temperature, self.escalation_temperature
            ));
        }
        for (i, k) in self.kinds.iter().enumerate() {
            if !k.is_injectable() {
                return bad(format!("{k} cannot be injected"));
            }
            if self.kinds[..i].contains(k) {
                return bad(format!("{k} listed twice"));
            }
        }
        if self.bundle_budget == 0 {
            return bad("bundle_budget must be positive".into());
        }
        Ok(())
    }
}

/// One message in the search tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct MessageCandidate<S> {
    pub id: String,
    pub text: String,
    /// Kinds applied along the lineage, oldest first.
    pub considered: Vec<ContextKind>,
    pub quality: QualityVector<S>,
    pub score: S,
    pub parent_id: Option<String>,
    pub step_created: usize,
    pub context: Option<ContextKind>,
    /// All configured kinds considered.
    pub terminal: bool,
}

impl<S> MessageCandidate<S> {
    pub fn has_considered(&self, kind: ContextKind) -> bool {
        self.considered.contains(&kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StepLimit,
    Converged,
    QueueExhausted,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::StepLimit => "step_limit",
            StopReason::Converged => "converged",
            StopReason::QueueExhausted => "queue_exhausted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult<S> {
    pub message: String,
    pub quality: QualityVector<S>,
    pub score: S,
    pub initial_score: S,
    pub steps_used: usize,
    pub stop_reason: StopReason,
    /// The recorded running bests, in order.
    pub updates: Vec<MessageCandidate<S>>,
    pub trace: Vec<TraceEvent>,
    /// Candidates skipped because a backend or evaluation call failed.
    pub diagnostics: Vec<String>,
}

impl<S> OptimizationResult<S> {
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.trace {
            out.push_str(&serde_json::to_string(e).expect("trace event serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("initial message is empty")]
    EmptyMessage,
    #[error("{0} was already considered by this candidate")]
    AlreadyConsidered(ContextKind),
    #[error("{0} is not an injectable context")]
    NotInjectable(ContextKind),
    #[error("evaluating the initial message failed: {0}")]
    InitialEvaluation(#[source] QualityError),
    #[error("update with {kind} failed: {source}")]
    Update { kind: ContextKind, source: LlmError },
    #[error("evaluating the {kind} child failed: {source}")]
    Evaluation { kind: ContextKind, source: QualityError },
    #[error("backend: {0}")]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}
