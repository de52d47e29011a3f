use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DiffError;

/// Abbreviated or full commit hash: 7 to 40 lowercase hex characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CommitId(String);

impl CommitId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for CommitId {
    type Err = DiffError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ok = (7..=40).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if ok {
            Ok(CommitId(s.to_string()))
        } else {
            Err(DiffError::InvalidCommitId(s.to_string()))
        }
    }
}

impl TryFrom<String> for CommitId {
    type Error = DiffError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<CommitId> for String {
    fn from(id: CommitId) -> String {
        id.0
    }
}

impl fmt::Display for CommitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Added,
    Deleted,
    Modified,
    Renamed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineTag {
    Context,
    Added,
    Removed,
}

impl LineTag {
    pub fn prefix(self) -> char {
        match self {
            LineTag::Context => ' ',
            LineTag::Added => '+',
            LineTag::Removed => '-',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunkLine {
    pub tag: LineTag,
    pub text: String,
    /// The line was followed by a `\ No newline at end of file` marker.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_newline: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    /// Text after the closing `@@`, usually the enclosing function line.
    #[serde(default)]
    pub section: String,
    pub lines: Vec<HunkLine>,
}

impl Hunk {
    pub fn added(&self) -> usize {
        self.lines.iter().filter(|l| l.tag == LineTag::Added).count()
    }

    pub fn removed(&self) -> usize {
        self.lines.iter().filter(|l| l.tag == LineTag::Removed).count()
    }

    /// Checks the header counts against the body.
    pub fn is_consistent(&self) -> bool {
        let old = self.lines.iter().filter(|l| l.tag != LineTag::Added).count();
        let new = self.lines.iter().filter(|l| l.tag != LineTag::Removed).count();
        old == self.old_len as usize && new == self.new_len as usize
    }

    pub(crate) fn header(&self) -> String {
        fn range(start: u32, len: u32) -> String {
            if len == 1 {
                start.to_string()
            } else {
                format!("{start},{len}")
            }
        }
        let mut h = format!(
            "@@ -{} +{} @@",
            range(self.old_start, self.old_len),
            range(self.new_start, self.new_len)
        );
        if !self.section.is_empty() {
            h.push(' ');
            h.push_str(&self.section);
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub change_kind: ChangeKind,
    /// Header lines preceding the first hunk, verbatim (`diff --git`, mode
    /// changes, `index`, `---`/`+++`, binary markers).
    pub headers: Vec<String>,
    #[serde(default)]
    pub binary: bool,
    pub hunks: Vec<Hunk>,
}

impl FileDiff {
    /// The path the file has after the change, or before it for deletions.
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or_default()
    }

    pub fn added(&self) -> usize {
        self.hunks.iter().map(Hunk::added).sum()
    }

    pub fn removed(&self) -> usize {
        self.hunks.iter().map(Hunk::removed).sum()
    }

    pub fn churn(&self) -> usize {
        self.added() + self.removed()
    }
}

/// A parsed unified diff for one commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitDiff {
    #[serde(default)]
    pub repo_id: String,
    #[serde(default)]
    pub commit_id: Option<CommitId>,
    pub files: Vec<FileDiff>,
    pub raw_text: String,
}

impl CommitDiff {
    pub fn file(&self, path: &str) -> Option<&FileDiff> {
        self.files
            .iter()
            .find(|f| f.new_path.as_deref() == Some(path) || f.old_path.as_deref() == Some(path))
    }

    pub fn has_text_hunks(&self) -> bool {
        self.files.iter().any(|f| !f.hunks.is_empty())
    }

    /// Re-renders the structured form as unified diff text.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.raw_text.len());
        for file in &self.files {
            for h in &file.headers {
                out.push_str(h);
                out.push('\n');
            }
            for hunk in &file.hunks {
                out.push_str(&hunk.header());
                out.push('\n');
                for line in &hunk.lines {
                    out.push(line.tag.prefix());
                    out.push_str(&line.text);
                    out.push('\n');
                    if line.no_newline {
                        out.push_str("\\ No newline at end of file\n");
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Pre,
    Post,
}

/// Full content of one file on one side of a commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSnapshot {
    pub path: String,
    pub content: String,
    pub side: Side,
}

impl FileSnapshot {
    pub fn new(path: impl Into<String>, content: impl Into<String>, side: Side) -> Self {
        FileSnapshot {
            path: path.into(),
            content: content.into(),
            side,
        }
    }

    pub fn line_count(&self) -> usize {
        self.content.lines().count()
    }
}

/// Snapshots of the touched files, keyed by side and path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SnapshotSet {
    snapshots: Vec<FileSnapshot>,
}

impl SnapshotSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, snap: FileSnapshot) {
        self.snapshots.retain(|s| !(s.side == snap.side && s.path == snap.path));
        self.snapshots.push(snap);
    }

    pub fn get(&self, side: Side, path: &str) -> Option<&FileSnapshot> {
        self.snapshots.iter().find(|s| s.side == side && s.path == path)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FileSnapshot> {
        self.snapshots.iter()
    }

    pub fn side(&self, side: Side) -> impl Iterator<Item = &FileSnapshot> {
        self.snapshots.iter().filter(move |s| s.side == side)
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

impl FromIterator<FileSnapshot> for SnapshotSet {
    fn from_iter<I: IntoIterator<Item = FileSnapshot>>(iter: I) -> Self {
        let mut set = SnapshotSet::new();
        for s in iter {
            set.insert(s);
        }
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_id_validation() {
        assert!("abc1234".parse::<CommitId>().is_ok());
        assert!("0123456789abcdef0123456789abcdef01234567".parse::<CommitId>().is_ok());
        assert!("abc123".parse::<CommitId>().is_err());
        assert!("ABC1234".parse::<CommitId>().is_err());
        assert!("xyz1234".parse::<CommitId>().is_err());
        assert!("0123456789abcdef0123456789abcdef012345678".parse::<CommitId>().is_err());
    }

    #[test]
    fn hunk_header_omits_unit_length() {
        let h = Hunk {
            old_start: 3,
            old_len: 1,
            new_start: 3,
            new_len: 2,
            section: "class A".into(),
            lines: vec![],
        };
        assert_eq!(h.header(), "@@ -3 +3,2 @@ class A");
    }
}
