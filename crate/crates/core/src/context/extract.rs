use std::collections::{BTreeSet, HashSet};

use super::index::{slice_lines, IndexedFile, MethodRef, ProjectIndex};
use super::java::{SourceFile, Span, VarDecl, VarKind};
use super::summarize::{summarize_unit, Summarizer, UnitKind};
use super::{ContextError, ContextItem, ContextKind, Locator, Provenance};
use crate::diff::{changed_line_map, ChangedLineMap, CommitDiff, FileDiff, LineTag, Side, SnapshotSet};

/// A run of changed lines in one file. For a pure deletion on a side that
/// still exists, `span` is the pair of surviving lines around the gap and
/// `gap` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChangedRegion {
    pub side: Side,
    pub span: Span,
    pub gap: bool,
}

impl ChangedRegion {
    /// Whether `block` encloses the change and shows something beyond it.
    fn enclosed_by(&self, block: Span) -> bool {
        if self.gap {
            block.start <= self.span.start && self.span.end <= block.end
        } else {
            block.contains(&self.span) && block.len() > self.span.len()
        }
    }
}

/// Changed runs of `file`, located on the post side unless the file was
/// deleted. `line_count` is the length of the post image.
pub(crate) fn changed_regions(file: &FileDiff, line_count: u32) -> Vec<ChangedRegion> {
    let deleted = file.new_path.is_none();
    let mut out = Vec::new();
    for hunk in &file.hunks {
        let mut old_no = hunk.old_start;
        // an empty post range is numbered by the line before it
        let mut new_no = if hunk.new_len == 0 {
            hunk.new_start + 1
        } else {
            hunk.new_start
        };
        let mut run: Option<(u32, Option<(u32, u32)>, Option<(u32, u32)>)> = None;
        let flush = |run: &mut Option<(u32, Option<(u32, u32)>, Option<(u32, u32)>)>, out: &mut Vec<ChangedRegion>| {
            let Some((anchor, removed, added)) = run.take() else {
                return;
            };
            if deleted {
                if let Some((a, b)) = removed {
                    out.push(ChangedRegion {
                        side: Side::Pre,
                        span: Span::new(a, b),
                        gap: false,
                    });
                }
            } else if let Some((a, b)) = added {
                out.push(ChangedRegion {
                    side: Side::Post,
                    span: Span::new(a, b),
                    gap: false,
                });
            } else if line_count > 0 {
                let hi = anchor.clamp(1, line_count);
                let lo = anchor.saturating_sub(1).clamp(1, line_count);
                out.push(ChangedRegion {
                    side: Side::Post,
                    span: Span::new(lo, hi),
                    gap: true,
                });
            }
        };
        let extend = |r: &mut Option<(u32, u32)>, n: u32| {
            *r = Some(match *r {
                Some((a, _)) => (a, n),
                None => (n, n),
            })
        };
        for line in &hunk.lines {
            match line.tag {
                LineTag::Context => {
                    flush(&mut run, &mut out);
                    old_no += 1;
                    new_no += 1;
                }
                LineTag::Removed => {
                    let r = run.get_or_insert((new_no, None, None));
                    extend(&mut r.1, old_no);
                    old_no += 1;
                }
                LineTag::Added => {
                    let r = run.get_or_insert((new_no, None, None));
                    extend(&mut r.2, new_no);
                    new_no += 1;
                }
            }
        }
        flush(&mut run, &mut out);
    }
    out
}

fn side_of(file: &FileDiff) -> (Side, &str) {
    match &file.new_path {
        Some(p) => (Side::Post, p.as_str()),
        None => (Side::Pre, file.old_path.as_deref().unwrap_or_default()),
    }
}

fn file_text<'a>(snapshots: &'a SnapshotSet, index: &'a ProjectIndex, side: Side, path: &str) -> Option<&'a str> {
    snapshots
        .get(side, path)
        .map(|s| s.content.as_str())
        .or_else(|| index.file(side, path).map(|f| f.content.as_str()))
}

/// The smallest statement block around each changed region, verbatim.
/// Regions outside any block produce nothing.
pub fn extract_enclosing_blocks(diff: &CommitDiff, snapshots: &SnapshotSet, index: &ProjectIndex) -> Vec<ContextItem> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for file in diff.files.iter().filter(|f| !f.binary) {
        let (side, path) = side_of(file);
        let Some(indexed) = index.file(side, path) else {
            continue;
        };
        let Some(text) = file_text(snapshots, index, side, path) else {
            continue;
        };
        for region in changed_regions(file, indexed.parsed.line_count) {
            let best = indexed
                .parsed
                .blocks
                .iter()
                .enumerate()
                .filter(|(_, b)| region.enclosed_by(b.span))
                .min_by_key(|(i, b)| (b.span.len(), std::cmp::Reverse(*i)));
            let Some((_, block)) = best else {
                log::debug!(
                    "{}",
                    ContextError::NoEnclosingBlock {
                        path: path.to_string(),
                        line: region.span.start,
                    }
                );
                continue;
            };
            if !seen.insert((side, path.to_string(), block.span)) {
                continue;
            }
            out.push(ContextItem {
                kind: ContextKind::EnclosingCodeBlock,
                payload: slice_lines(text, block.span.start, block.span.end),
                locator: Some(Locator {
                    path: path.to_string(),
                    side,
                    span: block.span,
                }),
                provenance: Provenance::new("enclosing_block")
                    .with("block_kind", format!("{:?}", block.kind).to_lowercase())
                    .with("change", format!("{}-{}", region.span.start, region.span.end)),
            });
        }
    }
    out
}

/// Changed lines per side of each indexed file in the diff, in diff order.
fn changed_files<'a>(diff: &'a CommitDiff, index: &'a ProjectIndex) -> Vec<(&'a IndexedFile, BTreeSet<u32>)> {
    let map = changed_line_map(diff);
    let mut out = Vec::new();
    for fc in &map.files {
        if let Some(p) = &fc.new_path {
            if let Some(f) = index.file(Side::Post, p) {
                out.push((f, fc.post.clone()));
            }
        }
        if let Some(p) = &fc.old_path {
            if let Some(f) = index.file(Side::Pre, p) {
                out.push((f, fc.pre.clone()));
            }
        }
    }
    out
}

fn changed_on(map: &ChangedLineMap, side: Side, path: &str, line: u32) -> bool {
    map.files.iter().any(|fc| match side {
        Side::Post => fc.new_path.as_deref() == Some(path) && fc.post.contains(&line),
        Side::Pre => fc.old_path.as_deref() == Some(path) && fc.pre.contains(&line),
    })
}

/// Project methods invoked on changed lines, resolved by name and arity.
/// Every overload with a matching arity is kept. Methods declared on changed
/// lines are left out. Payloads are summaries; when the summarizer is absent
/// or fails, the raw body is used and the fallback recorded in provenance.
pub fn extract_callee_knowledge(
    diff: &CommitDiff,
    _snapshots: &SnapshotSet,
    index: &ProjectIndex,
    summarizer: Option<&dyn Summarizer>,
) -> Vec<ContextItem> {
    let map = changed_line_map(diff);
    let mut seen: HashSet<MethodRef> = HashSet::new();
    let mut out = Vec::new();
    for (file, lines) in changed_files(diff, index) {
        for call in file.parsed.invocations.iter().filter(|c| lines.contains(&c.line)) {
            for &r in index.methods_named(&call.name, call.arity) {
                let target = &index.files()[r.file];
                let decl = &target.parsed.methods[r.method];
                if changed_on(&map, target.side, target.path(), decl.name_line) || !seen.insert(r) {
                    continue;
                }
                let body = target.lines(decl.span.start, decl.span.end);
                let locator = Locator {
                    path: target.path().to_string(),
                    side: target.side,
                    span: decl.span,
                };
                let call_site = format!("{}:{}", file.path(), call.line);
                let summarized = summarizer
                    .ok_or(None)
                    .and_then(|s| summarize_unit(&decl.qualified_name, &body, UnitKind::Method, s, None).map_err(Some));
                let (payload, prov) = match summarized {
                    Ok(item) => (item.payload, Provenance::new("callee_knowledge")),
                    Err(e) => {
                        let reason = e.map_or_else(|| "no summarizer".to_string(), |e| e.to_string());
                        log::info!("callee {}: raw body used ({reason})", decl.qualified_name);
                        (
                            format!("{}:\n{}", decl.qualified_name, body),
                            Provenance::new("callee_knowledge")
                                .with("fallback", "raw_body")
                                .with("reason", reason),
                        )
                    }
                };
                out.push(ContextItem {
                    kind: ContextKind::CalleeKnowledge,
                    payload,
                    locator: Some(locator),
                    provenance: prov
                        .with("callee", &decl.qualified_name)
                        .with("arity", decl.arity())
                        .with("call_site", call_site),
                });
            }
        }
    }
    out
}

fn is_field(v: &VarDecl) -> bool {
    matches!(v.kind, VarKind::Field | VarKind::RecordComponent)
}

/// `Map<K, V>[]` -> `Map`, `a.b.C` -> `C`.
fn base_type(ty: &str) -> &str {
    let ty = ty.split(['<', '[']).next().unwrap_or(ty).trim_end_matches("...").trim();
    ty.rsplit('.').next().unwrap_or(ty)
}

struct Resolver<'a> {
    index: &'a ProjectIndex,
}

type VarRef = (usize, usize);

impl<'a> Resolver<'a> {
    fn file(&self, i: usize) -> &'a SourceFile {
        &self.index.files()[i].parsed
    }

    fn local(&self, fi: usize, name: &str, line: u32) -> Option<VarRef> {
        self.file(fi)
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| !is_field(v) && v.name == name && v.scope.contains_line(line) && v.line <= line)
            .max_by_key(|(i, v)| (v.line, *i))
            .map(|(i, _)| (fi, i))
    }

    /// Fields of the class and its superclasses.
    fn member(&self, fi: usize, class: usize, name: &str, depth: usize) -> Option<VarRef> {
        if depth > 16 {
            return None;
        }
        let f = self.file(fi);
        if let Some(v) = f
            .vars
            .iter()
            .position(|v| is_field(v) && v.class == Some(class) && v.name == name)
        {
            return Some((fi, v));
        }
        let sup = f.classes[class].extends.as_deref()?;
        self.class_by_name(fi, sup)
            .and_then(|(sf, sc)| self.member(sf, sc, name, depth + 1))
    }

    /// Prefers a class in the same file.
    fn class_by_name(&self, fi: usize, name: &str) -> Option<(usize, usize)> {
        let f = self.file(fi);
        if let Some(c) = f
            .classes
            .iter()
            .position(|c| c.name == name && c.kind != super::java::ClassKind::Anonymous)
        {
            return Some((fi, c));
        }
        self.index.classes_named(name).first().map(|r| (r.file, r.class))
    }

    fn unqualified(&self, fi: usize, name: &str, line: u32) -> Option<VarRef> {
        if let Some(v) = self.local(fi, name, line) {
            return Some(v);
        }
        let mut class = self.file(fi).class_at(line);
        while let Some(c) = class {
            if let Some(v) = self.member(fi, c, name, 0) {
                return Some(v);
            }
            class = self.file(fi).classes[c].outer;
        }
        None
    }

    fn resolve(&self, fi: usize, name: &str, qualifier: Option<&str>, line: u32) -> Option<VarRef> {
        match qualifier {
            None => self.unqualified(fi, name, line),
            Some("") => None,
            Some("this") => self.member(fi, self.file(fi).class_at(line)?, name, 0),
            Some("super") => {
                let c = self.file(fi).class_at(line)?;
                let sup = self.file(fi).classes[c].extends.as_deref()?;
                let (sf, sc) = self.class_by_name(fi, sup)?;
                self.member(sf, sc, name, 0)
            }
            Some(q) => {
                let (tf, tc) = match self.unqualified(fi, q, line) {
                    Some((vf, vi)) => {
                        let ty = self.file(vf).vars[vi].type_text.as_deref()?;
                        self.class_by_name(vf, base_type(ty))?
                    }
                    None => self.class_by_name(fi, q)?,
                };
                self.member(tf, tc, name, 0)
            }
        }
    }
}

/// Declared type, modifiers and site of each identifier used on changed
/// lines whose declaration lies outside the diff. Unresolvable names
/// (library code) are skipped.
pub fn extract_variable_types(diff: &CommitDiff, _snapshots: &SnapshotSet, index: &ProjectIndex) -> Vec<ContextItem> {
    let map = changed_line_map(diff);
    let resolver = Resolver { index };
    // the same declaration seen from both sides of the diff counts once
    let mut seen: HashSet<(String, Option<String>, Option<String>, String, String)> = HashSet::new();
    let mut out = Vec::new();
    for (file, lines) in changed_files(diff, index) {
        let Some(fi) = index.file_index(file.side, file.path()) else {
            continue;
        };
        for u in file.parsed.idents.iter().filter(|u| lines.contains(&u.line)) {
            let Some(r) = resolver.resolve(fi, &u.name, u.qualifier.as_deref(), u.line) else {
                continue;
            };
            let target = &index.files()[r.0];
            let decl = &target.parsed.vars[r.1];
            let Some(ty) = decl.type_text.as_deref() else { continue };
            let p = &target.parsed;
            let key = (
                target.path().to_string(),
                decl.class.map(|c| p.classes[c].qualified_name.clone()),
                decl.method.map(|m| p.methods[m].qualified_name.clone()),
                decl.name.clone(),
                ty.to_string(),
            );
            if changed_on(&map, target.side, target.path(), decl.line) || !seen.insert(key) {
                continue;
            }
            let head = if decl.modifiers.is_empty() {
                format!("{}: {ty}", decl.name)
            } else {
                format!("{}: {} {ty}", decl.name, decl.modifiers.join(" "))
            };
            let site = target.lines(decl.line, decl.line);
            out.push(ContextItem {
                kind: ContextKind::VariableDataType,
                payload: format!("{head}\ndeclared at {}:{}: {}", target.path(), decl.line, site.trim()),
                locator: Some(Locator {
                    path: target.path().to_string(),
                    side: target.side,
                    span: Span::new(decl.line, decl.line),
                }),
                provenance: Provenance::new("variable_types")
                    .with("var_kind", format!("{:?}", decl.kind).to_lowercase())
                    .with("use", format!("{}:{}", file.path(), u.line)),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::build_project_index;
    use crate::diff::{parse_unified_diff, FileSnapshot};

    const PRE: &str = "class A {\n    private Computer ivar;\n    void f() {\n        int n = 1;\n        try {\n            n++;\n        } catch (Exception e) {\n            n--;\n        }\n    }\n}\n";
    const POST: &str = "class A {\n    private Computer ivar;\n    void f() {\n        int n = 1;\n        try {\n            n += helper(n);\n        } catch (Exception e) {\n            n--;\n        }\n    }\n    Computer getIvar() {\n        return ivar;\n    }\n    int helper(int x) {\n        return x;\n    }\n}\n";
    const DIFF: &str = "--- a/A.java\n+++ b/A.java\n@@ -6 +6 @@\n-            n++;\n+            n += helper(n);\n@@ -10,0 +11,3 @@\n+    Computer getIvar() {\n+        return ivar;\n+    }\n";

    fn setup() -> (CommitDiff, SnapshotSet, ProjectIndex) {
        let diff = parse_unified_diff(DIFF).unwrap();
        let snaps: SnapshotSet = [
            FileSnapshot::new("A.java", PRE, Side::Pre),
            FileSnapshot::new("A.java", POST, Side::Post),
        ]
        .into_iter()
        .collect();
        let index = build_project_index(snaps.iter());
        (diff, snaps, index)
    }

    #[test]
    fn regions() {
        let (diff, _, _) = setup();
        let r = changed_regions(&diff.files[0], 17);
        assert_eq!(
            r,
            [
                ChangedRegion {
                    side: Side::Post,
                    span: Span::new(6, 6),
                    gap: false
                },
                ChangedRegion {
                    side: Side::Post,
                    span: Span::new(11, 13),
                    gap: false
                },
            ]
        );
    }

    #[test]
    fn try_catch_block() {
        let (diff, snaps, index) = setup();
        let items = extract_enclosing_blocks(&diff, &snaps, &index);
        assert_eq!(items.len(), 1, "{items:#?}");
        assert_eq!(items[0].payload, slice_lines(POST, 5, 9));
        assert!(items[0].payload.starts_with("        try {") && items[0].payload.ends_with('}'));
    }

    #[test]
    fn callee_and_vars() {
        let (diff, snaps, index) = setup();
        let callees = extract_callee_knowledge(&diff, &snaps, &index, None);
        assert_eq!(callees.len(), 1);
        assert!(callees[0].payload.starts_with("A.helper:\n    int helper(int x) {"));
        assert_eq!(callees[0].provenance.params["fallback"], "raw_body");

        let vars = extract_variable_types(&diff, &snaps, &index);
        let heads: Vec<_> = vars
            .iter()
            .map(|v| v.payload.lines().next().unwrap().to_string())
            .collect();
        assert_eq!(heads, ["n: int", "ivar: private Computer"]);
    }

    #[test]
    fn removal_only_anchors_on_surrounding_lines() {
        let diff = parse_unified_diff("--- a/A.java\n+++ b/A.java\n@@ -3,2 +2,0 @@\n-x\n-y\n").unwrap();
        let r = changed_regions(&diff.files[0], 10);
        assert_eq!(r[0].span, Span::new(2, 3));
        assert!(r[0].gap);
    }

    #[test]
    fn base_types() {
        assert_eq!(base_type("Map<String, List<X>>"), "Map");
        assert_eq!(base_type("a.b.C[]"), "C");
        assert_eq!(base_type("T..."), "T");
    }
}
