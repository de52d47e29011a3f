//! Structured model of a commit's unified diff.

mod fingerprint;
mod git;
mod lines;
mod model;
mod parse;

use std::path::PathBuf;

use thiserror::Error;

pub use fingerprint::{diff_fingerprint, Fingerprint};
pub use git::{load_commit, LoadedCommit, Repository, GIT_BIN_ENV};
pub use lines::{changed_line_map, ChangedLineMap, FileChanges};
pub use model::{ChangeKind, CommitDiff, CommitId, FileDiff, FileSnapshot, Hunk, HunkLine, LineTag, Side, SnapshotSet};
pub use parse::parse_unified_diff;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("diff contains no file sections")]
    EmptyDiff,
    #[error("malformed diff at line {line}: {reason}")]
    MalformedDiff { line: usize, reason: String },
    #[error("file `{0}` appears more than once in the diff")]
    DuplicatePath(String),
    #[error("invalid commit id `{0}` (expected 7-40 lowercase hex characters)")]
    InvalidCommitId(String),
}

impl DiffError {
    pub(crate) fn malformed(line: usize, reason: &str) -> Self {
        DiffError::MalformedDiff {
            line,
            reason: reason.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum GitError {
    #[error("no git repository at {0}")]
    RepoNotFound(PathBuf),
    #[error("commit `{0}` not found")]
    CommitNotFound(String),
    #[error("commit {0} is a merge commit; only single-parent commits are supported")]
    MergeCommit(String),
    #[error("commit {0} has no text hunks")]
    BinaryOnlyCommit(String),
    #[error("failed to run {bin}: {source}")]
    Spawn { bin: PathBuf, source: std::io::Error },
    #[error("git {args} failed: {stderr}")]
    Command { args: String, stderr: String },
    #[error(transparent)]
    Diff(#[from] DiffError),
}
