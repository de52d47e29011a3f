use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::llm::{ChatMessage, ChatRequest, LlmClient, LlmError};

/// Presence of a change summary ("what") and a rationale ("why").
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhatWhy {
    pub what: bool,
    pub why: bool,
}

impl WhatWhy {
    pub fn both(self) -> bool {
        self.what && self.why
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhatWhyVerdict {
    pub labels: WhatWhy,
    /// The backend failed and the rule set answered instead.
    pub fell_back: bool,
}

pub trait WhatWhyClassifier: Send + Sync {
    fn classify(&self, message: &str) -> WhatWhyVerdict;
}

pub fn classify_what_why(message: &str, classifier: &dyn WhatWhyClassifier) -> WhatWhyVerdict {
    if message.trim().is_empty() {
        return WhatWhyVerdict {
            labels: WhatWhy::default(),
            fell_back: false,
        };
    }
    classifier.classify(message)
}

const SUMMARY_VERBS: &[&str] = &[
    "add",
    "adjust",
    "allow",
    "avoid",
    "bump",
    "change",
    "check",
    "clean",
    "convert",
    "correct",
    "create",
    "deprecate",
    "disable",
    "document",
    "drop",
    "enable",
    "ensure",
    "expose",
    "extract",
    "fix",
    "handle",
    "implement",
    "improve",
    "introduce",
    "make",
    "merge",
    "migrate",
    "move",
    "optimize",
    "prevent",
    "reduce",
    "refactor",
    "remove",
    "rename",
    "replace",
    "restore",
    "resolve",
    "return",
    "revert",
    "rewrite",
    "simplify",
    "split",
    "support",
    "update",
    "upgrade",
    "use",
    "delete",
    "set",
    "skip",
    "throw",
    "validate",
];

const RATIONALE_CUES: &[&str] = &["because", "since", "so that", "to avoid", "to fix", "otherwise"];

static ISSUE_CLOSER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i:\b(?:fix(?:es|ed)?|close[sd]?|resolve[sd]?))\s+(?:#\d+|\b[A-Za-z]+-\d+\b)").unwrap()
});

static CONVENTIONAL_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*[A-Za-z]+(?:\([^)]*\))?!?:\s*").unwrap());

fn inflects(word: &str, verb: &str) -> bool {
    if word == verb {
        return true;
    }
    let Some(rest) = word.strip_prefix(verb) else {
        // "make" -> "making", "use" -> "using"
        return verb
            .strip_suffix('e')
            .is_some_and(|stem| word.strip_prefix(stem) == Some("ing"));
    };
    let last = verb.chars().last().map(String::from).unwrap_or_default();
    matches!(rest, "s" | "es" | "ed" | "d" | "ing") || rest == format!("{last}ed") || rest == format!("{last}ing")
}

/// Offline rule set: a summary verb in the subject line means "what"; a
/// rationale cue (or an issue-closing reference) anywhere means "why".
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleClassifier;

impl RuleClassifier {
    pub fn labels(message: &str) -> WhatWhy {
        let subject = message.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        let subject = CONVENTIONAL_PREFIX.replace(subject, "");
        let what = super::embed::word_tokens(&subject)
            .iter()
            .any(|w| SUMMARY_VERBS.iter().any(|v| inflects(w, v)));

        let words = super::embed::word_tokens(message).join(" ");
        let padded = format!(" {words} ");
        let why =
            RATIONALE_CUES.iter().any(|cue| padded.contains(&format!(" {cue} "))) || ISSUE_CLOSER.is_match(message);
        WhatWhy { what, why }
    }
}

impl WhatWhyClassifier for RuleClassifier {
    fn classify(&self, message: &str) -> WhatWhyVerdict {
        WhatWhyVerdict {
            labels: Self::labels(message),
            fell_back: false,
        }
    }
}

/// Asks a chat model; any backend or parse failure falls back to
/// [`RuleClassifier`] with `fell_back` set.
pub struct LlmWhatWhyClassifier {
    client: Arc<LlmClient>,
    model: String,
}

const WHAT_WHY_RUBRIC: &str = "You label commit messages. A message has WHAT information when it \
summarizes the code change it describes. It has WHY information when it states the motivation or \
reason for the change (a bug it fixes, a problem it avoids, a requirement it meets). Answer with a \
single JSON object of the form {\"what\": true|false, \"why\": true|false} and nothing else.";

impl LlmWhatWhyClassifier {
    pub fn new(client: Arc<LlmClient>, model: impl Into<String>) -> Self {
        LlmWhatWhyClassifier {
            client,
            model: model.into(),
        }
    }

    fn ask(&self, message: &str) -> Result<WhatWhy, LlmError> {
        let req = ChatRequest::new(
            self.model.clone(),
            vec![
                ChatMessage::system(WHAT_WHY_RUBRIC),
                ChatMessage::user(format!("Commit message:\n{message}")),
            ],
        )
        .with_max_tokens(32);
        let resp = self.client.chat(&req)?;
        parse_labels(&resp.content)
            .ok_or_else(|| LlmError::MalformedResponse(format!("not a what/why label: {}", resp.content)))
    }
}

fn parse_labels(text: &str) -> Option<WhatWhy> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    serde_json::from_str(text.get(start..=end)?).ok()
}

impl WhatWhyClassifier for LlmWhatWhyClassifier {
    fn classify(&self, message: &str) -> WhatWhyVerdict {
        match self.ask(message) {
            Ok(labels) => WhatWhyVerdict {
                labels,
                fell_back: false,
            },
            Err(e) => {
                log::warn!("what/why backend failed ({e}); using rule set");
                WhatWhyVerdict {
                    labels: RuleClassifier::labels(message),
                    fell_back: true,
                }
            }
        }
    }
}
