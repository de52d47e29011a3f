use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ContextError;
use crate::diff::CommitDiff;
use crate::llm::{ChatMessage, ChatRequest, LlmClient};
use crate::quality::{truncate_head, DEFAULT_DIFF_TOKEN_BUDGET};

pub const DEFAULT_TAXONOMY: [&str; 3] = ["corrective", "perfective", "adaptive"];

/// Temperature for the single retry after an unparseable answer.
const RETRY_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitType {
    pub label: String,
    /// The backend's answer as received.
    pub raw_response: String,
}

/// Exactly one taxonomy member must occur in the response as a whole
/// word, case-insensitively.
pub fn parse_commit_type(response: &str, taxonomy: &[String]) -> Result<CommitType, ContextError> {
    let lower = response.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric() && c != '-' && c != '_')
        .collect();
    let hits: Vec<&String> = taxonomy
        .iter()
        .filter(|t| words.contains(&t.to_lowercase().as_str()))
        .collect();
    match hits.as_slice() {
        [one] => Ok(CommitType {
            label: (*one).clone(),
            raw_response: response.to_string(),
        }),
        _ => Err(ContextError::UnparseableLabel {
            response: response.to_string(),
        }),
    }
}

pub struct CommitTypeClassifier {
    client: Arc<LlmClient>,
    model: String,
    taxonomy: Vec<String>,
    diff_token_budget: usize,
}

impl CommitTypeClassifier {
    pub fn new(client: Arc<LlmClient>, model: impl Into<String>) -> Self {
        CommitTypeClassifier {
            client,
            model: model.into(),
            taxonomy: DEFAULT_TAXONOMY.iter().map(|s| s.to_string()).collect(),
            diff_token_budget: DEFAULT_DIFF_TOKEN_BUDGET,
        }
    }

    pub fn with_taxonomy(mut self, taxonomy: Vec<String>) -> Self {
        self.taxonomy = taxonomy;
        self
    }

    pub fn taxonomy(&self) -> &[String] {
        &self.taxonomy
    }

    /// The message section is left out when `message` is blank.
    pub fn request(&self, diff: &CommitDiff, message: &str, temperature: f64) -> ChatRequest {
        let (diff_text, _) = truncate_head(&diff.raw_text, self.diff_token_budget);
        let mut user = format!("Git diff:\n{diff_text}");
        if !message.trim().is_empty() {
            user.push_str(&format!("\n\nCommit message:\n{message}"));
        }
        ChatRequest::new(
            self.model.clone(),
            vec![
                ChatMessage::system(format!(
                    "Classify the maintenance activity of this commit as one of: {}. \
                     Reply with the label only.",
                    self.taxonomy.join(", ")
                )),
                ChatMessage::user(user),
            ],
        )
        .with_temperature(temperature)
        .with_max_tokens(8)
    }

    pub fn classify(&self, diff: &CommitDiff, message: &str, temperature: f64) -> Result<CommitType, ContextError> {
        let resp = self
            .client
            .chat(&self.request(diff, message, temperature))
            .map_err(|source| ContextError::Backend {
                unit: "commit type".into(),
                source,
            })?;
        parse_commit_type(&resp.content, &self.taxonomy)
    }
}

pub fn classify_commit_type(
    diff: &CommitDiff,
    initial_message: &str,
    classifier: &CommitTypeClassifier,
) -> Result<CommitType, ContextError> {
    classifier.classify(diff, initial_message, 0.0)
}

/// One retry at a higher temperature when the first answer names no label.
pub fn classify_commit_type_with_retry(
    diff: &CommitDiff,
    initial_message: &str,
    classifier: &CommitTypeClassifier,
) -> Result<CommitType, ContextError> {
    match classifier.classify(diff, initial_message, 0.0) {
        Err(ContextError::UnparseableLabel { response }) => {
            log::info!("unparseable commit type {response:?}; retrying");
            classifier.classify(diff, initial_message, RETRY_TEMPERATURE)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::parse_unified_diff;
    use crate::llm::{MockBackend, RetryPolicy};

    fn diff() -> CommitDiff {
        parse_unified_diff("--- a/A.java\n+++ b/A.java\n@@ -1 +1 @@\n-a\n+b\n").unwrap()
    }

    fn classifier(mock: Arc<MockBackend>) -> CommitTypeClassifier {
        CommitTypeClassifier::new(
            Arc::new(LlmClient::new(mock).with_retry(RetryPolicy::no_delay(1))),
            "ct",
        )
    }

    #[test]
    fn passthrough_and_rejection() {
        let c = classifier(Arc::new(MockBackend::sequence(["Corrective.", "sandwich"])));
        assert_eq!(classify_commit_type(&diff(), "fix", &c).unwrap().label, "corrective");
        assert!(matches!(
            classify_commit_type(&diff(), "other", &c),
            Err(ContextError::UnparseableLabel { .. })
        ));
    }

    #[test]
    fn ambiguous_is_unparseable() {
        let tax: Vec<String> = DEFAULT_TAXONOMY.iter().map(|s| s.to_string()).collect();
        assert!(parse_commit_type("corrective or adaptive", &tax).is_err());
        assert_eq!(parse_commit_type("ADAPTIVE", &tax).unwrap().label, "adaptive");
    }

    #[test]
    fn blank_message_omits_section() {
        let mock = Arc::new(MockBackend::responder(|_| Some("perfective".into())));
        let c = classifier(mock.clone());
        classify_commit_type(&diff(), "  ", &c).unwrap();
        classify_commit_type(&diff(), "Rename b", &c).unwrap();
        let t = mock.transcript();
        assert!(!t[0].user_text().contains("Commit message"));
        assert!(t[1].user_text().contains("Commit message:\nRename b"));
    }

    #[test]
    fn retry_once_hotter() {
        let mock = Arc::new(MockBackend::sequence(["dunno", "adaptive"]));
        let c = classifier(mock.clone());
        assert_eq!(
            classify_commit_type_with_retry(&diff(), "m", &c).unwrap().label,
            "adaptive"
        );
        let t = mock.transcript();
        assert_eq!((t[0].temperature, t[1].temperature), (0.0, 1.0));
    }
}
