mod common;

use std::collections::BTreeSet;

use cmo_core::context::{
    extract_contexts, index_commit, ContextDeps, ContextItem, ContextKind, FixtureForge, Summarizer, UnitKind,
};
use cmo_core::diff::Repository;
use cmo_core::llm::LlmError;
use common::extraction::{check_blocks_with_oracle, check_commits, check_decls};

#[test]
fn declaration_counts_match_manifest() {
    check_decls().unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn block_spans_agree_with_brace_oracle() {
    check_blocks_with_oracle().unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn commit_items_match_manifest() {
    let repo = common::fixture_repo();
    check_commits(&repo).unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn brace_oracle_skips_literals() {
    let src = "class A {\n  String s = \"{\";\n  char c = '}';\n  // {\n  /* } */\n  void f() {\n  }\n}\n";
    assert_eq!(common::brace_pairs(src), [(6, 7), (1, 8)]);
}

struct FirstLine;

impl Summarizer for FirstLine {
    fn summarize(&self, qualified_name: &str, source: &str, _: UnitKind) -> Result<String, LlmError> {
        Ok(format!(
            "{qualified_name}: {}",
            source.lines().next().unwrap_or("").trim()
        ))
    }
}

#[test]
fn items_are_anchored_and_repeatable() {
    let repo = common::fixture_repo();
    let git = Repository::open(repo.path()).unwrap();
    let forge = FixtureForge::new(common::inventory().join("forge"));
    let deps = ContextDeps {
        summarizer: Some(&FirstLine),
        forge: Some(&forge),
        ..ContextDeps::default()
    };
    let mut kinds_seen = BTreeSet::new();
    for (_, sha) in &repo.commits {
        let loaded = git.load_commit(sha).unwrap();
        let (snaps, index) = index_commit(&git, &loaded).unwrap();
        let run = || extract_contexts(&loaded.diff, &snaps, &index, &loaded.message, &deps, &ContextKind::ALL);
        let (a, b) = (run(), run());
        let items: Vec<ContextItem> = a.iter().cloned().collect();
        assert_eq!(items, b.iter().cloned().collect::<Vec<_>>());
        let touched: BTreeSet<&str> = loaded.diff.files.iter().map(|f| f.path()).collect();
        for item in &items {
            kinds_seen.insert(item.kind);
            assert_ne!(item.kind, ContextKind::CommitType);
            assert!(!item.payload.is_empty(), "{item:?}");
            let anchored = matches!(
                item.kind,
                ContextKind::EnclosingCodeBlock
                    | ContextKind::CalleeKnowledge
                    | ContextKind::VariableDataType
                    | ContextKind::MethodBodySummary
                    | ContextKind::ClassBodySummary
            );
            if !anchored {
                continue;
            }
            let loc = item.locator.as_ref().unwrap_or_else(|| panic!("no locator: {item:?}"));
            let snap = snaps
                .get(loc.side, &loc.path)
                .unwrap_or_else(|| panic!("no snapshot for {loc:?}"));
            assert!(1 <= loc.span.start && loc.span.start <= loc.span.end, "{loc:?}");
            assert!(loc.span.end as usize <= snap.line_count(), "{loc:?}");
            if !matches!(item.kind, ContextKind::CalleeKnowledge | ContextKind::VariableDataType) {
                assert!(touched.contains(loc.path.as_str()), "{loc:?}");
            }
        }
    }
    assert!(kinds_seen.len() >= 5, "{kinds_seen:?}");
}
