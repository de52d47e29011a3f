//! Read-only access to a git repository through the `git` executable.

use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::process::Command;

use super::model::{ChangeKind, CommitDiff, CommitId, FileSnapshot, Side, SnapshotSet};
use super::parse::parse_unified_diff;
use super::GitError;

/// Environment variable overriding the git executable.
pub const GIT_BIN_ENV: &str = "CMO_GIT_BIN";

/// A commit's diff against its first parent plus full pre/post images of the
/// touched text files.
#[derive(Debug, Clone)]
pub struct LoadedCommit {
    pub diff: CommitDiff,
    pub snapshots: SnapshotSet,
    pub message: String,
    pub parent: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Repository {
    bin: PathBuf,
    root: PathBuf,
}

impl Repository {
    /// Opens the repository at `path` using `$CMO_GIT_BIN` or `git`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GitError> {
        let bin = std::env::var_os(GIT_BIN_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("git"));
        Self::open_with(path, bin)
    }

    pub fn open_with(path: impl AsRef<Path>, bin: impl Into<PathBuf>) -> Result<Self, GitError> {
        let path = path.as_ref();
        if !path.is_dir() {
            return Err(GitError::RepoNotFound(path.to_path_buf()));
        }
        let repo = Repository {
            bin: bin.into(),
            root: path.to_path_buf(),
        };
        let top = repo.run(["rev-parse", "--show-toplevel"]).map_err(|e| match e {
            GitError::Command { .. } => GitError::RepoNotFound(path.to_path_buf()),
            other => other,
        })?;
        Ok(Repository {
            root: PathBuf::from(top.trim_end()),
            ..repo
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Directory name of the working tree, used as the repo id.
    pub fn repo_id(&self) -> String {
        self.root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    /// Resolves any revision expression to a full commit hash.
    pub fn resolve(&self, rev: &str) -> Result<String, GitError> {
        let spec = format!("{rev}^{{commit}}");
        self.run(["rev-parse", "--verify", "--quiet", spec.as_str()])
            .map(|s| s.trim().to_string())
            .map_err(|e| match e {
                GitError::Command { .. } => GitError::CommitNotFound(rev.to_string()),
                other => other,
            })
    }

    pub fn parents(&self, sha: &str) -> Result<Vec<String>, GitError> {
        let out = self.run(["rev-list", "--parents", "-n", "1", sha])?;
        Ok(out.split_whitespace().skip(1).map(str::to_string).collect())
    }

    pub fn message(&self, sha: &str) -> Result<String, GitError> {
        let out = self.run(["log", "-1", "--format=%B", sha])?;
        Ok(out.trim_end().to_string())
    }

    /// Unified diff of `sha` against its first parent (or the empty tree for
    /// a root commit), three context lines, rename detection on.
    pub fn diff_text(&self, sha: &str) -> Result<String, GitError> {
        self.run([
            "-c",
            "core.quotepath=false",
            "-c",
            "diff.noprefix=false",
            "-c",
            "diff.mnemonicprefix=false",
            "diff-tree",
            "-p",
            "-M",
            "--root",
            "--no-commit-id",
            "--no-color",
            "--no-ext-diff",
            "--no-textconv",
            "-U3",
            sha,
        ])
    }

    /// Contents of `path` at `rev`, or `None` for binary / non-UTF-8 blobs.
    pub fn file_at(&self, rev: &str, path: &str) -> Result<Option<String>, GitError> {
        let spec = format!("{rev}:{path}");
        let bytes = self.run_bytes(["cat-file", "blob", spec.as_str()])?;
        if bytes.contains(&0) {
            return Ok(None);
        }
        Ok(String::from_utf8(bytes).ok())
    }

    /// Every file at `rev` whose path passes `filter`, as post-side snapshots.
    pub fn tree_snapshots(&self, rev: &str, filter: impl Fn(&str) -> bool) -> Result<Vec<FileSnapshot>, GitError> {
        let listing = self.run(["-c", "core.quotepath=false", "ls-tree", "-r", "--name-only", rev])?;
        let mut out = Vec::new();
        for path in listing.lines().filter(|p| filter(p)) {
            if let Some(content) = self.file_at(rev, path)? {
                out.push(FileSnapshot::new(path, content, Side::Post));
            }
        }
        Ok(out)
    }

    pub fn load_commit(&self, commit: &str) -> Result<LoadedCommit, GitError> {
        let sha = self.resolve(commit)?;
        let parents = self.parents(&sha)?;
        if parents.len() > 1 {
            return Err(GitError::MergeCommit(sha));
        }
        let parent = parents.into_iter().next();

        let text = self.diff_text(&sha)?;
        if text.trim().is_empty() {
            return Err(GitError::BinaryOnlyCommit(sha));
        }
        let mut diff = parse_unified_diff(&text)?;
        diff.repo_id = self.repo_id();
        diff.commit_id = Some(sha.parse::<CommitId>()?);
        if !diff.has_text_hunks() {
            return Err(GitError::BinaryOnlyCommit(sha));
        }

        let mut snapshots = SnapshotSet::new();
        for file in diff.files.iter().filter(|f| !f.binary) {
            if let (Some(parent), Some(old)) = (&parent, &file.old_path) {
                if file.change_kind != ChangeKind::Added {
                    if let Some(content) = self.file_at(parent, old)? {
                        snapshots.insert(FileSnapshot::new(old.clone(), content, Side::Pre));
                    }
                }
            }
            if let Some(new) = &file.new_path {
                if let Some(content) = self.file_at(&sha, new)? {
                    snapshots.insert(FileSnapshot::new(new.clone(), content, Side::Post));
                }
            }
        }

        Ok(LoadedCommit {
            diff,
            snapshots,
            message: self.message(&sha)?,
            parent,
        })
    }

    fn run<I, S>(&self, args: I) -> Result<String, GitError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<OsStr>,
    {
        let bytes = self.run_bytes(args)?;
        String::from_utf8(bytes).map_err(|e| GitError::Command {
            args: String::new(),
            stderr: format!("non-UTF-8 output: {e}"),
        })
    }

    fn run_bytes<I, S>(&self, args: I) -> Result<Vec<u8>, GitError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<OsStr>,
    {
        let args: Vec<_> = args.into_iter().map(|a| a.as_ref().to_os_string()).collect();
        let output = Command::new(&self.bin)
            .arg("-C")
            .arg(&self.root)
            .args(&args)
            .env("GIT_TERMINAL_PROMPT", "0")
            .output()
            .map_err(|source| GitError::Spawn {
                bin: self.bin.clone(),
                source,
            })?;
        if !output.status.success() {
            return Err(GitError::Command {
                args: args.iter().map(|a| a.to_string_lossy()).collect::<Vec<_>>().join(" "),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        Ok(output.stdout)
    }
}

/// Loads `commit_id` from the repository at `repo_path`.
pub fn load_commit(repo_path: impl AsRef<Path>, commit_id: &str) -> Result<LoadedCommit, GitError> {
    Repository::open(repo_path)?.load_commit(commit_id)
}
