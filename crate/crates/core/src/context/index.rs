use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::java::{parse_java, ClassKind, ParseError, SourceFile, VarKind};
use crate::diff::{FileSnapshot, Side};

/// A source-language frontend. Only Java ships.
pub trait Frontend: Send + Sync {
    fn id(&self) -> &str;
    fn accepts(&self, path: &str) -> bool;
    fn parse(&self, path: &str, source: &str) -> Result<SourceFile, ParseError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct JavaFrontend;

impl Frontend for JavaFrontend {
    fn id(&self) -> &str {
        "java"
    }

    fn accepts(&self, path: &str) -> bool {
        path.ends_with(".java")
    }

    fn parse(&self, path: &str, source: &str) -> Result<SourceFile, ParseError> {
        parse_java(path, source)
    }
}

/// A file the frontend could not parse; it is left out of the index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub side: Side,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct IndexedFile {
    pub side: Side,
    pub content: String,
    pub parsed: SourceFile,
}

impl IndexedFile {
    pub fn path(&self) -> &str {
        &self.parsed.path
    }

    /// Lines `start..=end` verbatim, without the final newline.
    pub fn lines(&self, start: u32, end: u32) -> String {
        slice_lines(&self.content, start, end)
    }
}

pub(crate) fn slice_lines(content: &str, start: u32, end: u32) -> String {
    content
        .lines()
        .skip(start.saturating_sub(1) as usize)
        .take((end + 1).saturating_sub(start) as usize)
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodRef {
    pub file: usize,
    pub method: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassRef {
    pub file: usize,
    pub class: usize,
}

/// Declaration totals, used to check fixtures against hand-made manifests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclCounts {
    /// Named classes, interfaces, enums and records.
    pub classes: usize,
    pub methods: usize,
    /// Fields and record components.
    pub fields: usize,
    /// Locals, parameters, catch parameters, resources and lambda parameters.
    pub locals: usize,
}

impl std::ops::AddAssign for DeclCounts {
    fn add_assign(&mut self, o: Self) {
        self.classes += o.classes;
        self.methods += o.methods;
        self.fields += o.fields;
        self.locals += o.locals;
    }
}

/// Parsed project files, with method lookup by (name, arity) and class
/// lookup by simple name over the post-side tree.
#[derive(Debug, Clone, Default)]
pub struct ProjectIndex {
    files: Vec<IndexedFile>,
    by_path: HashMap<(Side, String), usize>,
    methods: HashMap<(String, usize), Vec<MethodRef>>,
    classes: HashMap<String, Vec<ClassRef>>,
    diagnostics: Vec<Diagnostic>,
}

impl ProjectIndex {
    pub fn files(&self) -> &[IndexedFile] {
        &self.files
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn file(&self, side: Side, path: &str) -> Option<&IndexedFile> {
        self.by_path.get(&(side, path.to_string())).map(|&i| &self.files[i])
    }

    pub fn file_index(&self, side: Side, path: &str) -> Option<usize> {
        self.by_path.get(&(side, path.to_string())).copied()
    }

    /// Every post-side declaration named `name` taking `arity` parameters,
    /// in (path, position) order.
    pub fn methods_named(&self, name: &str, arity: usize) -> &[MethodRef] {
        self.methods
            .get(&(name.to_string(), arity))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn classes_named(&self, name: &str) -> &[ClassRef] {
        self.classes.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn decl_counts(&self, side: Side, path: &str) -> Option<DeclCounts> {
        self.file(side, path).map(|f| count_decls(&f.parsed))
    }

    pub fn total_decl_counts(&self, side: Side) -> DeclCounts {
        let mut out = DeclCounts::default();
        for f in self.files.iter().filter(|f| f.side == side) {
            out += count_decls(&f.parsed);
        }
        out
    }
}

fn count_decls(f: &SourceFile) -> DeclCounts {
    DeclCounts {
        classes: f.classes.iter().filter(|c| c.kind != ClassKind::Anonymous).count(),
        methods: f.methods.len(),
        fields: f
            .vars
            .iter()
            .filter(|v| matches!(v.kind, VarKind::Field | VarKind::RecordComponent))
            .count(),
        locals: f
            .vars
            .iter()
            .filter(|v| !matches!(v.kind, VarKind::Field | VarKind::RecordComponent))
            .count(),
    }
}

/// Indexes the Java files among `snapshots`. Files that fail to parse are
/// skipped and reported in [`ProjectIndex::diagnostics`].
pub fn build_project_index<'a>(snapshots: impl IntoIterator<Item = &'a FileSnapshot>) -> ProjectIndex {
    build_project_index_with(snapshots, &JavaFrontend)
}

pub fn build_project_index_with<'a>(
    snapshots: impl IntoIterator<Item = &'a FileSnapshot>,
    frontend: &dyn Frontend,
) -> ProjectIndex {
    let mut snaps: Vec<&FileSnapshot> = snapshots.into_iter().filter(|s| frontend.accepts(&s.path)).collect();
    snaps.sort_by(|a, b| (a.side, &a.path).cmp(&(b.side, &b.path)));
    snaps.dedup_by(|a, b| a.side == b.side && a.path == b.path);

    let mut index = ProjectIndex::default();
    for snap in snaps {
        match frontend.parse(&snap.path, &snap.content) {
            Ok(parsed) => {
                let i = index.files.len();
                index.by_path.insert((snap.side, snap.path.clone()), i);
                if snap.side == Side::Post {
                    for (m, decl) in parsed.methods.iter().enumerate() {
                        index
                            .methods
                            .entry((decl.name.clone(), decl.arity()))
                            .or_default()
                            .push(MethodRef { file: i, method: m });
                    }
                    for (c, decl) in parsed.classes.iter().enumerate() {
                        if decl.kind != ClassKind::Anonymous {
                            index
                                .classes
                                .entry(decl.name.clone())
                                .or_default()
                                .push(ClassRef { file: i, class: c });
                        }
                    }
                }
                index.files.push(IndexedFile {
                    side: snap.side,
                    content: snap.content.clone(),
                    parsed,
                });
            }
            Err(e) => {
                log::warn!("skipping {}: line {}: {}", snap.path, e.line, e.reason);
                index.diagnostics.push(Diagnostic {
                    path: snap.path.clone(),
                    side: snap.side,
                    reason: format!("line {}: {}", e.line, e.reason),
                });
            }
        }
    }
    index
}
