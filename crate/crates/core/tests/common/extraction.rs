//! Extraction checks against the hand-audited inventory manifest.

use std::collections::BTreeSet;

use cmo_core::context::{build_project_index, extract_contexts, index_commit, ContextDeps, ContextKind, ProjectIndex};
use cmo_core::diff::{FileSnapshot, Repository, Side};

use super::{brace_pairs, inventory, manifest, tree, FixtureRepo};

fn lines(text: &str, start: u32, end: u32) -> String {
    let all: Vec<&str> = text.lines().collect();
    all[start as usize - 1..end as usize].join("\n")
}

/// Post image of `path` after scenario `name`.
fn post_text(name: &str, path: &str) -> String {
    let sc = inventory().join("commits").join(name).join(path);
    let p = if sc.exists() {
        sc
    } else {
        inventory().join("base").join(path)
    };
    std::fs::read_to_string(p).unwrap()
}

pub fn base_index() -> ProjectIndex {
    let snaps: Vec<FileSnapshot> = tree(&inventory().join("base"))
        .into_iter()
        .map(|(p, c)| FileSnapshot::new(p, c, Side::Post))
        .collect();
    build_project_index(snaps.iter())
}

pub fn check_decls() -> Result<(), String> {
    let m = manifest();
    let index = base_index();
    if !index.diagnostics().is_empty() {
        return Err(format!("parse failures: {:?}", index.diagnostics()));
    }
    if index.files().len() != m.java_files || m.decls.len() != m.java_files {
        return Err(format!(
            "indexed {} java files, manifest lists {}",
            index.files().len(),
            m.decls.len()
        ));
    }
    let mut bad = Vec::new();
    for (path, want) in &m.decls {
        let got = index
            .decl_counts(Side::Post, path)
            .ok_or_else(|| format!("{path} not indexed"))?;
        let got = [got.classes, got.methods, got.fields, got.locals];
        if &got != want {
            bad.push(format!(
                "{path}: [classes, methods, fields, locals] = {got:?}, manifest {want:?}"
            ));
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad.join("\n"))
    }
}

/// Follows `} catch (..) {` / `} else {` chains from the pair opened on `open`.
fn chain_end(pairs: &[(u32, u32)], open: u32) -> Option<u32> {
    let mut end = pairs.iter().find(|p| p.0 == open)?.1;
    while let Some(next) = pairs.iter().find(|p| p.0 == end) {
        end = next.1;
    }
    Some(end)
}

/// Every block ends on a line that closes a brace opened inside the block,
/// and single-line headers end exactly where the brace chain does.
pub fn check_blocks_with_oracle() -> Result<(), String> {
    let index = base_index();
    for f in index.files() {
        let pairs = brace_pairs(&f.content);
        for b in &f.parsed.blocks {
            let (s, e) = (b.span.start, b.span.end);
            if !pairs.iter().any(|&(o, c)| c == e && s <= o && o <= e) {
                return Err(format!(
                    "{}: {:?} {s}-{e} does not end on a matching brace",
                    f.path(),
                    b.kind
                ));
            }
            let header = f.content.lines().nth(s as usize - 1).unwrap_or("");
            let single_line_header = header.trim_end().ends_with('{') && !header.trim_start().starts_with('@');
            if single_line_header && chain_end(&pairs, s) != Some(e) {
                return Err(format!(
                    "{}: {:?} {s}-{e}, brace chain ends at {:?}",
                    f.path(),
                    b.kind,
                    chain_end(&pairs, s)
                ));
            }
        }
    }
    Ok(())
}

pub fn check_commits(repo: &FixtureRepo) -> Result<(), String> {
    let m = manifest();
    let git = Repository::open(repo.path()).map_err(|e| e.to_string())?;
    let kinds = [
        ContextKind::EnclosingCodeBlock,
        ContextKind::CalleeKnowledge,
        ContextKind::VariableDataType,
    ];
    for c in &m.commits {
        let loaded = git.load_commit(repo.sha(&c.name)).map_err(|e| e.to_string())?;
        let (snaps, index) = index_commit(&git, &loaded).map_err(|e| e.to_string())?;
        let set = extract_contexts(
            &loaded.diff,
            &snaps,
            &index,
            &loaded.message,
            &ContextDeps::default(),
            &kinds,
        );

        let want: BTreeSet<_> = c
            .enclosing
            .iter()
            .map(|b| {
                (
                    b.path.clone(),
                    b.start,
                    b.end,
                    b.block_kind.clone(),
                    lines(&post_text(&c.name, &b.path), b.start, b.end),
                )
            })
            .collect();
        let got: BTreeSet<_> = set
            .get(ContextKind::EnclosingCodeBlock)
            .iter()
            .map(|i| {
                let l = i.locator.as_ref().unwrap();
                (
                    l.path.clone(),
                    l.span.start,
                    l.span.end,
                    i.provenance.params["block_kind"].clone(),
                    i.payload.clone(),
                )
            })
            .collect();
        if got != want || set.get(ContextKind::EnclosingCodeBlock).len() != want.len() {
            return Err(format!("{}: enclosing blocks\n got {got:#?}\nwant {want:#?}", c.name));
        }

        let want: BTreeSet<_> = c
            .callees
            .iter()
            .map(|k| {
                let body = lines(&post_text(&c.name, &k.path), k.start, k.end);
                (
                    k.callee.clone(),
                    k.path.clone(),
                    k.start,
                    k.end,
                    format!("{}:\n{body}", k.callee),
                )
            })
            .collect();
        let got: BTreeSet<_> = set
            .get(ContextKind::CalleeKnowledge)
            .iter()
            .map(|i| {
                let l = i.locator.as_ref().unwrap();
                (
                    i.provenance.params["callee"].clone(),
                    l.path.clone(),
                    l.span.start,
                    l.span.end,
                    i.payload.clone(),
                )
            })
            .collect();
        if got != want || set.get(ContextKind::CalleeKnowledge).len() != want.len() {
            return Err(format!("{}: callees\n got {got:#?}\nwant {want:#?}", c.name));
        }

        let mut got: Vec<String> = set
            .get(ContextKind::VariableDataType)
            .iter()
            .map(|i| i.payload.clone())
            .collect();
        got.sort();
        let mut want = c.vars.clone();
        want.sort();
        if got != want {
            return Err(format!("{}: variable types\n got {got:#?}\nwant {want:#?}", c.name));
        }
    }
    Ok(())
}
