use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::extract::{extract_callee_knowledge, extract_enclosing_blocks, extract_variable_types};
use super::files::rank_important_files;
use super::index::{build_project_index, ProjectIndex};
use super::issues::{link_issue_or_pr, ForgeClient, DEFAULT_ISSUE_BUDGET};
use super::java::ClassKind;
use super::summarize::{summarize_unit, Summarizer, UnitKind};
use super::{ContextError, ContextItem, ContextKind, Locator};
use crate::diff::{changed_line_map, CommitDiff, LoadedCommit, Repository, Side, SnapshotSet};

/// Backends the extractors may call. Absent ones degrade gracefully.
#[derive(Clone, Copy)]
pub struct ContextDeps<'a> {
    pub summarizer: Option<&'a dyn Summarizer>,
    pub forge: Option<&'a dyn ForgeClient>,
    pub issue_budget: usize,
}

impl Default for ContextDeps<'_> {
    fn default() -> Self {
        ContextDeps {
            summarizer: None,
            forge: None,
            issue_budget: DEFAULT_ISSUE_BUDGET,
        }
    }
}

/// Extracted items grouped by kind. Kinds with no items are absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ContextSet {
    pub items: BTreeMap<ContextKind, Vec<ContextItem>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl ContextSet {
    pub fn get(&self, kind: ContextKind) -> &[ContextItem] {
        self.items.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn insert(&mut self, item: ContextItem) {
        self.items.entry(item.kind).or_default().push(item);
    }

    /// Kinds that produced at least one item.
    pub fn available(&self) -> Vec<ContextKind> {
        self.items
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ContextItem> {
        self.items.values().flatten()
    }
}

/// Touched-file snapshots plus every Java file of the commit's tree, and
/// their index.
pub fn index_commit(repo: &Repository, loaded: &LoadedCommit) -> Result<(SnapshotSet, ProjectIndex), ContextError> {
    let mut snapshots = loaded.snapshots.clone();
    if let Some(id) = &loaded.diff.commit_id {
        for snap in repo.tree_snapshots(id.as_str(), |p| p.ends_with(".java"))? {
            if snapshots.get(Side::Post, &snap.path).is_none() {
                snapshots.insert(snap);
            }
        }
    }
    let index = build_project_index(snapshots.iter());
    Ok((snapshots, index))
}

fn summaries(
    diff: &CommitDiff,
    index: &ProjectIndex,
    summarizer: &dyn Summarizer,
    kind: UnitKind,
    diagnostics: &mut Vec<String>,
) -> Vec<ContextItem> {
    let map = changed_line_map(diff);
    let mut units = BTreeSet::new();
    let mut out = Vec::new();
    for fc in &map.files {
        let (side, path, lines) = match &fc.new_path {
            Some(p) => (Side::Post, p, &fc.post),
            None => (Side::Pre, fc.old_path.as_ref().expect("one side"), &fc.pre),
        };
        let Some(file) = index.file(side, path) else { continue };
        let parsed = &file.parsed;
        for &line in lines {
            let unit = match kind {
                UnitKind::Method => parsed.method_at(line).filter(|&m| parsed.methods[m].has_body),
                UnitKind::Class => {
                    let mut c = parsed.class_at(line);
                    while let Some(i) = c.filter(|&i| parsed.classes[i].kind == ClassKind::Anonymous) {
                        c = parsed.classes[i].outer;
                    }
                    c
                }
            };
            let Some(u) = unit else { continue };
            if !units.insert((side, path.clone(), u)) {
                continue;
            }
            let (name, span) = match kind {
                UnitKind::Method => (&parsed.methods[u].qualified_name, parsed.methods[u].span),
                UnitKind::Class => (&parsed.classes[u].qualified_name, parsed.classes[u].span),
            };
            let locator = Locator {
                path: path.clone(),
                side,
                span,
            };
            match summarize_unit(name, &file.lines(span.start, span.end), kind, summarizer, Some(locator)) {
                Ok(item) => out.push(item),
                Err(e) => {
                    log::warn!("{e}");
                    diagnostics.push(e.to_string());
                }
            }
        }
    }
    out
}

/// Runs the extractors for `kinds`. Extraction never fails as a whole;
/// problems with single items are logged and recorded as diagnostics.
pub fn extract_contexts(
    diff: &CommitDiff,
    snapshots: &SnapshotSet,
    index: &ProjectIndex,
    message: &str,
    deps: &ContextDeps<'_>,
    kinds: &[ContextKind],
) -> ContextSet {
    let mut set = ContextSet::default();
    for d in index.diagnostics() {
        set.diagnostics.push(format!("parse skipped {}: {}", d.path, d.reason));
    }
    let kinds: BTreeSet<ContextKind> = kinds.iter().copied().collect();
    for kind in kinds {
        let items = match kind {
            ContextKind::CommitType => continue,
            ContextKind::ImportantFileInfo => rank_important_files(diff).into_iter().collect(),
            ContextKind::PullRequestIssueReport => link_issue_or_pr(message, diff, deps.forge, deps.issue_budget)
                .into_iter()
                .collect(),
            ContextKind::EnclosingCodeBlock => extract_enclosing_blocks(diff, snapshots, index),
            ContextKind::CalleeKnowledge => extract_callee_knowledge(diff, snapshots, index, deps.summarizer),
            ContextKind::VariableDataType => extract_variable_types(diff, snapshots, index),
            ContextKind::MethodBodySummary | ContextKind::ClassBodySummary => {
                let Some(s) = deps.summarizer else {
                    set.diagnostics.push(format!("{kind}: no summarizer configured"));
                    continue;
                };
                let unit = if kind == ContextKind::MethodBodySummary {
                    UnitKind::Method
                } else {
                    UnitKind::Class
                };
                summaries(diff, index, s, unit, &mut set.diagnostics)
            }
        };
        for item in items {
            set.insert(item);
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{parse_unified_diff, FileSnapshot};
    use crate::llm::LlmError;

    struct Echo;

    impl Summarizer for Echo {
        fn summarize(&self, name: &str, _: &str, kind: UnitKind) -> Result<String, LlmError> {
            Ok(format!("{kind:?} {name}"))
        }
    }

    #[test]
    fn all_kinds() {
        let post = "class A {\n  int n;\n  void f() {\n    n = g();\n  }\n  int g() { return 1; }\n}\n";
        let pre = "class A {\n  int n;\n  void f() {\n    n = 0;\n  }\n  int g() { return 1; }\n}\n";
        let diff = parse_unified_diff("--- a/A.java\n+++ b/A.java\n@@ -4 +4 @@\n-    n = 0;\n+    n = g();\n").unwrap();
        let snaps: SnapshotSet = [
            FileSnapshot::new("A.java", pre, Side::Pre),
            FileSnapshot::new("A.java", post, Side::Post),
        ]
        .into_iter()
        .collect();
        let index = build_project_index(snaps.iter());
        let deps = ContextDeps {
            summarizer: Some(&Echo),
            ..Default::default()
        };
        let set = extract_contexts(&diff, &snaps, &index, "msg", &deps, &ContextKind::ALL);
        assert_eq!(
            set.available(),
            [
                ContextKind::ImportantFileInfo,
                ContextKind::MethodBodySummary,
                ContextKind::ClassBodySummary,
                ContextKind::EnclosingCodeBlock,
                ContextKind::CalleeKnowledge,
                ContextKind::VariableDataType,
            ]
        );
        assert_eq!(set.get(ContextKind::MethodBodySummary)[0].payload, "A.f: Method A.f");
        assert_eq!(set.get(ContextKind::ClassBodySummary)[0].payload, "A: Class A");
        assert_eq!(set.get(ContextKind::CalleeKnowledge)[0].payload, "A.g: Method A.g");
        assert!(set.iter().all(|i| i.kind != ContextKind::CommitType));
        let again = extract_contexts(&diff, &snaps, &index, "msg", &deps, &ContextKind::ALL);
        assert_eq!(set, again);
    }
}
