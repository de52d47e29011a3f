use std::collections::BTreeSet;

use serde::Serialize;

use super::model::{CommitDiff, LineTag};

/// Changed line numbers (1-based) of one file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FileChanges {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    /// Removed lines, numbered in the pre-image.
    pub pre: BTreeSet<u32>,
    /// Added lines, numbered in the post-image.
    pub post: BTreeSet<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ChangedLineMap {
    pub files: Vec<FileChanges>,
}

impl ChangedLineMap {
    /// Lookup by post-side path, falling back to the pre-side path.
    pub fn get(&self, path: &str) -> Option<&FileChanges> {
        self.files
            .iter()
            .find(|f| f.new_path.as_deref() == Some(path))
            .or_else(|| self.files.iter().find(|f| f.old_path.as_deref() == Some(path)))
    }
}

pub fn changed_line_map(diff: &CommitDiff) -> ChangedLineMap {
    let files = diff
        .files
        .iter()
        .map(|file| {
            let mut changes = FileChanges {
                old_path: file.old_path.clone(),
                new_path: file.new_path.clone(),
                ..Default::default()
            };
            for hunk in &file.hunks {
                let mut old_no = hunk.old_start;
                let mut new_no = hunk.new_start;
                for line in &hunk.lines {
                    match line.tag {
                        LineTag::Context => {
                            old_no += 1;
                            new_no += 1;
                        }
                        LineTag::Removed => {
                            changes.pre.insert(old_no);
                            old_no += 1;
                        }
                        LineTag::Added => {
                            changes.post.insert(new_no);
                            new_no += 1;
                        }
                    }
                }
            }
            changes
        })
        .collect();
    ChangedLineMap { files }
}
