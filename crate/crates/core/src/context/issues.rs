use std::path::PathBuf;
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ContextItem, ContextKind, Provenance};
use crate::diff::CommitDiff;

pub const FORGE_URL_ENV: &str = "CMO_FORGE_URL";
pub const FORGE_TOKEN_ENV: &str = "CMO_FORGE_TOKEN";

/// Default byte budget for an issue/PR payload.
pub const DEFAULT_ISSUE_BUDGET: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub title: String,
    #[serde(default)]
    pub body: String,
}

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("forge unreachable: {0}")]
    Unreachable(String),
    #[error("malformed issue record for {id}: {reason}")]
    Malformed { id: String, reason: String },
}

/// Resolves `#N` / `KEY-N` references. `Ok(None)` means the forge answered
/// but knows no such issue.
pub trait ForgeClient: Send + Sync {
    fn fetch(&self, id: &str) -> Result<Option<Issue>, ForgeError>;
}

/// Offline forge: `<dir>/issues/<id>.json` holding `{"title", "body"}`.
#[derive(Debug, Clone)]
pub struct FixtureForge {
    dir: PathBuf,
}

impl FixtureForge {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureForge { dir: dir.into() }
    }
}

impl ForgeClient for FixtureForge {
    fn fetch(&self, id: &str) -> Result<Option<Issue>, ForgeError> {
        let issues = self.dir.join("issues");
        if !issues.is_dir() {
            return Err(ForgeError::Unreachable(format!(
                "{} is not a directory",
                issues.display()
            )));
        }
        let path = issues.join(format!("{id}.json"));
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(ForgeError::Unreachable(format!("{}: {e}", path.display()))),
        };
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| ForgeError::Malformed {
                id: id.to_string(),
                reason: e.to_string(),
            })
    }
}

/// `GET <base>/issues/<id>` returning `{"title", "body"}`; 404 means unknown.
pub struct HttpForge {
    base_url: String,
    token: Option<String>,
    client: Client,
}

impl HttpForge {
    pub fn new(base_url: impl Into<String>, token: Option<String>, timeout: Duration) -> Result<Self, ForgeError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ForgeError::Unreachable(e.to_string()))?;
        Ok(HttpForge {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            token,
            client,
        })
    }
}

impl ForgeClient for HttpForge {
    fn fetch(&self, id: &str) -> Result<Option<Issue>, ForgeError> {
        let mut req = self.client.get(format!("{}/issues/{id}", self.base_url));
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| ForgeError::Unreachable(e.to_string()))?;
        match resp.status() {
            StatusCode::NOT_FOUND => Ok(None),
            s if s.is_success() => resp.json().map(Some).map_err(|e| ForgeError::Malformed {
                id: id.to_string(),
                reason: e.to_string(),
            }),
            s => Err(ForgeError::Unreachable(format!("status {s}"))),
        }
    }
}

static HASH_REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#(\d+)\b").unwrap());
static KEY_REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([A-Z]+-\d+)\b").unwrap());

/// Issue ids in order of first appearance, message before diff. `#42`
/// yields `"42"`, `PROJ-7` yields `"PROJ-7"`.
pub fn find_issue_refs(message: &str, diff: &CommitDiff) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for text in [message, diff.raw_text.as_str()] {
        let mut found: Vec<(usize, String)> = HASH_REF
            .captures_iter(text)
            .map(|c| (c.get(0).unwrap().start(), c[1].to_string()))
            .chain(
                KEY_REF
                    .captures_iter(text)
                    .map(|c| (c.get(0).unwrap().start(), c[1].to_string())),
            )
            .collect();
        found.sort();
        for (_, id) in found {
            if !out.contains(&id) {
                out.push(id);
            }
        }
    }
    out
}

fn truncate_bytes(s: &str, budget: usize) -> &str {
    if s.len() <= budget {
        return s;
    }
    let mut end = budget;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    &s[..end]
}

/// One item covering every reference the forge resolves, cut to `budget`
/// bytes. Absent when nothing resolves or no forge is configured; forge
/// failures are logged and skipped.
pub fn link_issue_or_pr(
    message: &str,
    diff: &CommitDiff,
    forge: Option<&dyn ForgeClient>,
    budget: usize,
) -> Option<ContextItem> {
    let forge = forge?;
    let mut parts = Vec::new();
    let mut resolved = Vec::new();
    for id in find_issue_refs(message, diff) {
        match forge.fetch(&id) {
            Ok(Some(issue)) => {
                let label = if id.bytes().all(|b| b.is_ascii_digit()) {
                    format!("#{id}")
                } else {
                    id.clone()
                };
                parts.push(
                    format!("{label}: {}\n{}", issue.title.trim(), issue.body.trim())
                        .trim_end()
                        .to_string(),
                );
                resolved.push(label);
            }
            Ok(None) => log::debug!("issue {id} not found"),
            Err(e) => log::warn!("issue {id}: {e}"),
        }
    }
    if parts.is_empty() {
        return None;
    }
    let joined = parts.join("\n\n");
    Some(ContextItem {
        kind: ContextKind::PullRequestIssueReport,
        payload: truncate_bytes(&joined, budget).to_string(),
        locator: None,
        provenance: Provenance::new("issue_link").with("refs", resolved.join(",")),
    })
}
