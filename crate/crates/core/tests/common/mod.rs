//! Fixture helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Deserialize;

pub mod extraction;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn inventory() -> PathBuf {
    fixtures().join("inventory")
}

#[derive(Debug, Deserialize)]
pub struct Manifest {
    pub java_files: usize,
    /// path -> [classes, methods, fields, locals]
    pub decls: BTreeMap<String, [usize; 4]>,
    pub commits: Vec<CommitManifest>,
}

#[derive(Debug, Deserialize)]
pub struct CommitManifest {
    pub name: String,
    pub enclosing: Vec<BlockEntry>,
    pub callees: Vec<CalleeEntry>,
    pub vars: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct BlockEntry {
    pub path: String,
    pub start: u32,
    pub end: u32,
    pub block_kind: String,
}

#[derive(Debug, Deserialize)]
pub struct CalleeEntry {
    pub callee: String,
    pub path: String,
    pub start: u32,
    pub end: u32,
}

pub fn manifest() -> Manifest {
    let text = fs::read_to_string(inventory().join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Every file under `dir`, as (relative path with `/`, content), sorted.
pub fn tree(dir: &Path) -> Vec<(String, String)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap();
                let rel = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                out.push((rel, fs::read_to_string(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

fn git(dir: &Path, args: &[&str]) -> String {
    let out = Command::new("git")
        .current_dir(dir)
        .args([
            "-c",
            "user.name=Fixture",
            "-c",
            "user.email=fixture@example.com",
            "-c",
            "commit.gpgsign=false",
        ])
        .args(args)
        .env("GIT_AUTHOR_DATE", "2024-01-02T03:04:05Z")
        .env("GIT_COMMITTER_DATE", "2024-01-02T03:04:05Z")
        .env_remove("GIT_DIR")
        .output()
        .expect("git runs");
    assert!(
        out.status.success(),
        "git {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_tree(dir: &Path, files: &[(String, String)]) {
    for (rel, content) in files {
        let p = dir.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, content).unwrap();
    }
}

pub struct FixtureRepo {
    pub dir: tempfile::TempDir,
    /// (scenario name, commit sha), in commit order after the base import.
    pub commits: Vec<(String, String)>,
}

impl FixtureRepo {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn sha(&self, name: &str) -> &str {
        &self.commits.iter().find(|(n, _)| n == name).unwrap().1
    }
}

/// A git repository holding the base project, then one commit per scenario
/// directory. Each scenario carries full post images plus `message.txt`.
/// Scenarios apply on top of the base, not of each other.
pub fn fixture_repo() -> FixtureRepo {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    git(root, &["init", "-q", "-b", "main"]);
    let base = tree(&inventory().join("base"));
    write_tree(root, &base);
    git(root, &["add", "-A"]);
    git(root, &["commit", "-q", "-m", "Import inventory service"]);
    let mut commits = Vec::new();
    let mut scenarios: Vec<_> = fs::read_dir(inventory().join("commits"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    scenarios.sort();
    for sc in scenarios {
        let name = sc.file_name().unwrap().to_string_lossy().to_string();
        git(root, &["checkout", "-q", "main"]);
        git(root, &["checkout", "-q", "-b", &name]);
        let files = tree(&sc);
        let message = files.iter().find(|(p, _)| p == "message.txt").unwrap().1.clone();
        let changed: Vec<_> = files.into_iter().filter(|(p, _)| p != "message.txt").collect();
        write_tree(root, &changed);
        git(root, &["add", "-A"]);
        git(root, &["commit", "-q", "-m", &message]);
        commits.push((name, git(root, &["rev-parse", "HEAD"]).trim().to_string()));
    }
    FixtureRepo { dir, commits }
}

/// Line pairs of matching `{` `}` in Java source, ignoring braces inside
/// comments, string, text-block and char literals. Written independently
/// of the production lexer.
pub fn brace_pairs(src: &str) -> Vec<(u32, u32)> {
    let b = src.as_bytes();
    let (mut i, mut line) = (0usize, 1u32);
    let mut stack = Vec::new();
    let mut out = Vec::new();
    while i < b.len() {
        let c = b[i];
        if c == b'\n' {
            line += 1;
            i += 1;
        } else if b[i..].starts_with(b"//") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if b[i..].starts_with(b"/*") {
            i += 2;
            while i < b.len() && !b[i..].starts_with(b"*/") {
                line += (b[i] == b'\n') as u32;
                i += 1;
            }
            i += 2;
        } else if b[i..].starts_with(b"\"\"\"") {
            i += 3;
            while i < b.len() && !b[i..].starts_with(b"\"\"\"") {
                line += (b[i] == b'\n') as u32;
                i += if b[i] == b'\\' { 2 } else { 1 };
            }
            i += 3;
        } else if c == b'"' || c == b'\'' {
            i += 1;
            while i < b.len() && b[i] != c {
                i += if b[i] == b'\\' { 2 } else { 1 };
            }
            i += 1;
        } else {
            if c == b'{' {
                stack.push(line);
            } else if c == b'}' {
                out.push((stack.pop().expect("balanced"), line));
            }
            i += 1;
        }
    }
    assert!(stack.is_empty(), "unbalanced braces");
    out
}
