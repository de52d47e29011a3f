use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::OptimizerError;
use crate::context::{CommitType, ContextItem, ContextKind};
use crate::diff::CommitDiff;
use crate::llm::{ChatMessage, ChatRequest, LlmClient, LlmError};
use crate::quality::{truncate_head, Metric, QualityVector, DEFAULT_DIFF_TOKEN_BUDGET, SCORING_CRITERIA};
use crate::retrieval::{Exemplar, RetrievalError};
use crate::scalar::Scalar;

pub const DEFAULT_FORMAT_TEMPLATE: &str = "<type>: <subject>\n\n- <what changed>\n- <why it changed>";

pub const DEFAULT_BUNDLE_BUDGET: usize = 4096;

/// Whitespace-token budget for each exemplar diff in a prompt.
pub const EXEMPLAR_DIFF_TOKENS: usize = 400;

pub const GIT_DIFF_DEFINITION: &str = "A git diff lists the changes of a commit file by file. Each hunk starts \
with an @@ header giving the old and new line ranges; lines starting with '-' were removed, lines starting \
with '+' were added and other lines are unchanged context.";

/// All items of one kind, joined into a single injection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub kind: ContextKind,
    pub payload: String,
    /// How many items made it under the budget.
    pub items: usize,
}

fn cut(s: &str, budget: usize) -> &str {
    if s.len() <= budget {
        return s;
    }
    let mut end = budget;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    &s[..end]
}

/// One bundle per kind in `kinds` that has items. Items are taken largest
/// first while they fit in `budget` bytes; a kind whose smallest item alone
/// exceeds the budget still yields that item cut to size.
pub fn bundle_contexts(items: &[ContextItem], kinds: &[ContextKind], budget: usize) -> Vec<ContextBundle> {
    const SEP: &str = "\n\n";
    let mut out = Vec::new();
    for &kind in kinds {
        let mut of_kind: Vec<&ContextItem> = items
            .iter()
            .filter(|i| i.kind == kind && !i.payload.is_empty())
            .collect();
        if of_kind.is_empty() {
            continue;
        }
        of_kind.sort_by_key(|i| std::cmp::Reverse(i.payload.len()));
        let mut payload = String::new();
        let mut n = 0;
        for item in &of_kind {
            let extra = if payload.is_empty() { 0 } else { SEP.len() };
            if payload.len() + extra + item.payload.len() <= budget {
                if extra > 0 {
                    payload.push_str(SEP);
                }
                payload.push_str(&item.payload);
                n += 1;
            }
        }
        if n == 0 {
            let smallest = of_kind.last().expect("non-empty");
            payload = cut(&smallest.payload, budget).to_string();
            n = 1;
        }
        out.push(ContextBundle {
            kind,
            payload,
            items: n,
        });
    }
    out
}

/// Inputs for one UPDATE call.
pub struct UpdateRequest<'a, S> {
    pub diff: &'a CommitDiff,
    pub current_message: &'a str,
    pub feedback: &'a QualityVector<S>,
    pub considered: &'a [ContextKind],
    pub context: &'a ContextBundle,
    pub commit_type: Option<&'a CommitType>,
    pub exemplars: &'a [Exemplar],
    pub format_template: &'a str,
    pub temperature: f64,
}

/// Rewrites a message given one new context.
pub trait MessageUpdater<S: Scalar>: Send + Sync {
    fn update(&self, req: &UpdateRequest<'_, S>) -> Result<String, LlmError>;
}

fn exemplar_section(exemplars: &[Exemplar]) -> String {
    let mut s = String::from("Commits similar to this one, with their human-written messages:\n");
    for (i, e) in exemplars.iter().enumerate() {
        let (d, _) = truncate_head(&e.diff_text, EXEMPLAR_DIFF_TOKENS);
        s.push_str(&format!(
            "\nExample {}\nDiff:\n{}\nMessage:\n{}\n",
            i + 1,
            d.trim_end(),
            e.message_text.trim()
        ));
    }
    s
}

fn metric_section() -> String {
    let mut s = String::from("A message is judged on four metrics:\n");
    for m in Metric::ALL {
        s.push_str("- ");
        s.push_str(m.definition());
        s.push('\n');
    }
    s.push_str(SCORING_CRITERIA);
    s
}

fn diff_section(diff: &CommitDiff) -> String {
    let (d, _) = truncate_head(&diff.raw_text, DEFAULT_DIFF_TOKEN_BUDGET);
    format!("{GIT_DIFF_DEFINITION}\n\nGit diff of the commit:\n{}", d.trim_end())
}

/// System and user text for an UPDATE call.
pub fn update_prompt<S: Scalar>(req: &UpdateRequest<'_, S>) -> (String, String) {
    let system = "You improve commit messages. You are given a commit, its current message with \
                  feedback scores, and one new piece of context about the code. Rewrite the message \
                  so that it scores higher, and reply with the new commit message only."
        .to_string();
    let mut user = diff_section(req.diff);
    user.push_str(&format!("\n\nExpected message format:\n{}\n\n", req.format_template));
    user.push_str(&metric_section());
    if let Some(ct) = req.commit_type {
        user.push_str(&format!("\n\nCommit type: {}", ct.label));
    }
    user.push_str("\n\n");
    user.push_str(&exemplar_section(req.exemplars));
    user.push_str(&format!(
        "\nCurrent commit message:\n{}\n\nFeedback scores for the current message:\n",
        req.current_message.trim()
    ));
    for m in Metric::ALL {
        user.push_str(&format!("- {}: {:.2}\n", m.name(), req.feedback.get(m).to_f64_lossy()));
    }
    let considered = if req.considered.is_empty() {
        "none".to_string()
    } else {
        req.considered.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
    };
    user.push_str(&format!("\nContexts already used: {considered}\n"));
    user.push_str(&format!(
        "\nNew context ({}: {}):\n{}\n\nWrite the improved commit message.",
        req.context.kind.name(),
        req.context.kind.title(),
        req.context.payload
    ));
    (system, user)
}

pub struct LlmUpdater {
    client: Arc<LlmClient>,
    model: String,
    max_tokens: u32,
}

impl LlmUpdater {
    pub fn new(client: Arc<LlmClient>, model: impl Into<String>) -> Self {
        LlmUpdater {
            client,
            model: model.into(),
            max_tokens: 512,
        }
    }

    pub fn request<S: Scalar>(&self, req: &UpdateRequest<'_, S>) -> ChatRequest {
        let (system, user) = update_prompt(req);
        ChatRequest::new(
            self.model.clone(),
            vec![ChatMessage::system(system), ChatMessage::user(user)],
        )
        .with_temperature(req.temperature)
        .with_max_tokens(self.max_tokens)
    }
}

impl<S: Scalar> MessageUpdater<S> for LlmUpdater {
    fn update(&self, req: &UpdateRequest<'_, S>) -> Result<String, LlmError> {
        let resp = self.client.chat(&self.request(req))?;
        let text = resp.content.trim();
        if text.is_empty() {
            return Err(LlmError::MalformedResponse("empty message".into()));
        }
        Ok(text.to_string())
    }
}

pub fn initial_message_request(
    diff: &CommitDiff,
    exemplars: &[Exemplar],
    model: &str,
    format_template: &str,
) -> ChatRequest {
    let system = "You write commit messages for code changes. Reply with the commit message only.";
    let mut user = diff_section(diff);
    user.push_str(&format!("\n\nExpected message format:\n{format_template}\n\n"));
    user.push_str(&exemplar_section(exemplars));
    user.push_str("\nWrite the commit message for the commit above.");
    ChatRequest::new(model, vec![ChatMessage::system(system), ChatMessage::user(user)]).with_max_tokens(512)
}

/// A first message for commits that have none, written from the diff and
/// the retrieved examples.
pub fn generate_initial_message(
    diff: &CommitDiff,
    exemplars: &[Exemplar],
    client: &LlmClient,
    model: &str,
    format_template: &str,
) -> Result<String, OptimizerError> {
    if exemplars.is_empty() {
        return Err(OptimizerError::Retrieval(RetrievalError::EmptyCorpus));
    }
    let resp = client.chat(&initial_message_request(diff, exemplars, model, format_template))?;
    let text = resp.content.trim();
    if text.is_empty() {
        return Err(OptimizerError::Backend(LlmError::MalformedResponse(
            "empty message".into(),
        )));
    }
    Ok(text.to_string())
}
