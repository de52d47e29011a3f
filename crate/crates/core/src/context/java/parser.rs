//! Structural Java parser. It does not build an AST; it tracks braces and
//! parentheses, classifies each `{` from the tokens that precede it, and
//! records declarations, statement blocks, invocations and identifier uses.

use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, TokKind, Token};

/// Inclusive 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

impl Span {
    pub fn new(start: u32, end: u32) -> Self {
        Span { start, end }
    }

    pub fn contains_line(&self, line: u32) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn len(&self) -> u32 {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Class,
    Interface,
    Enum,
    Record,
    Annotation,
    Anonymous,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: String,
    pub qualified_name: String,
    pub kind: ClassKind,
    pub name_line: u32,
    /// Header through closing brace.
    pub span: Span,
    pub extends: Option<String>,
    pub outer: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub type_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDecl {
    pub name: String,
    pub qualified_name: String,
    pub class: Option<usize>,
    pub params: Vec<Param>,
    pub signature: String,
    pub name_line: u32,
    /// Header through closing brace (or `;` for abstract methods).
    pub span: Span,
    pub has_body: bool,
    pub is_constructor: bool,
}

impl MethodDecl {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Field,
    Local,
    Param,
    CatchParam,
    Resource,
    LambdaParam,
    RecordComponent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub type_text: Option<String>,
    pub modifiers: Vec<String>,
    pub kind: VarKind,
    pub line: u32,
    /// Lines where the name is visible.
    pub scope: Span,
    pub class: Option<usize>,
    pub method: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    If,
    For,
    While,
    Do,
    Try,
    Switch,
    Synchronized,
    Bare,
    MethodBody,
    Lambda,
    Initializer,
}

/// A brace-delimited statement (or method body, lambda body, initializer).
/// `if`/`else` chains and `try`/`catch`/`finally` chains form one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub kind: BlockKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub name: String,
    pub arity: usize,
    pub line: u32,
    pub qualifier: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentUse {
    pub name: String,
    pub line: u32,
    /// `x` in `x.name`; empty when the receiver is not a simple name.
    pub qualifier: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceFile {
    pub path: String,
    pub package: Option<String>,
    pub line_count: u32,
    pub classes: Vec<ClassDecl>,
    pub methods: Vec<MethodDecl>,
    pub vars: Vec<VarDecl>,
    pub blocks: Vec<Block>,
    pub invocations: Vec<Invocation>,
    pub idents: Vec<IdentUse>,
}

impl SourceFile {
    /// Innermost class whose span contains `line`.
    pub fn class_at(&self, line: u32) -> Option<usize> {
        innermost(self.classes.iter().map(|c| c.span), line)
    }

    /// Innermost method whose span contains `line`.
    pub fn method_at(&self, line: u32) -> Option<usize> {
        innermost(self.methods.iter().map(|m| m.span), line)
    }
}

fn innermost(spans: impl Iterator<Item = Span>, line: u32) -> Option<usize> {
    spans
        .enumerate()
        .filter(|(_, s)| s.contains_line(line))
        .min_by_key(|(i, s)| (s.len(), std::cmp::Reverse(*i)))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: u32,
    pub reason: String,
}

const KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
    "true",
    "false",
    "null",
];

const PRIMITIVES: &[&str] = &["boolean", "byte", "char", "short", "int", "long", "float", "double"];

const MODIFIERS: &[&str] = &[
    "public",
    "protected",
    "private",
    "static",
    "final",
    "abstract",
    "transient",
    "volatile",
    "synchronized",
    "native",
    "strictfp",
    "default",
    "sealed",
    "non",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    Root,
    Class(usize),
    Method(usize),
    Code,
    Lambda,
    ArrayInit,
}

#[derive(Debug)]
struct Frame {
    kind: FrameKind,
    header_start: usize,
    paren: i32,
    block: Option<usize>,
    /// Statement-like frames reset the parent header when they close.
    statement: bool,
    /// Last closed `if`/`try` block directly before the current header.
    chain: Option<usize>,
    pending_do: Option<usize>,
    pending_vars: Vec<usize>,
    class: Option<usize>,
    method: Option<usize>,
}

impl Frame {
    fn new(kind: FrameKind, header_start: usize, class: Option<usize>, method: Option<usize>) -> Self {
        Frame {
            kind,
            header_start,
            paren: 0,
            block: None,
            statement: true,
            chain: None,
            pending_do: None,
            pending_vars: Vec::new(),
            class,
            method,
        }
    }

    fn is_class_context(&self) -> bool {
        matches!(self.kind, FrameKind::Root | FrameKind::Class(_))
    }
}

struct Parser<'a> {
    toks: &'a [Token],
    out: SourceFile,
    /// Token indices naming a declaration or otherwise not a use.
    not_use: Vec<bool>,
    stack: Vec<Frame>,
    /// Line of the first raw header token of the `{` being opened, so
    /// declarations start at their annotations.
    raw_start: Option<u32>,
}

pub fn parse_java(path: &str, src: &str) -> Result<SourceFile, ParseError> {
    let toks = tokenize(src).map_err(|e| ParseError {
        line: e.line,
        reason: e.reason,
    })?;
    let line_count = src.lines().count().max(1) as u32;
    let mut p = Parser {
        toks: &toks,
        out: SourceFile {
            path: path.to_string(),
            line_count,
            ..Default::default()
        },
        not_use: vec![false; toks.len()],
        stack: vec![Frame::new(FrameKind::Root, 0, None, None)],
        raw_start: None,
    };
    p.run()?;
    p.collect_uses();
    Ok(p.out)
}

impl<'a> Parser<'a> {
    fn is(&self, i: usize, text: &str) -> bool {
        i < self.toks.len() && self.toks[i].is(text)
    }

    fn is_name(&self, i: usize) -> bool {
        i < self.toks.len() && self.toks[i].is_ident() && !is_keyword(&self.toks[i].text)
    }

    fn top(&mut self) -> &mut Frame {
        self.stack.last_mut().expect("root frame")
    }

    fn run(&mut self) -> Result<(), ParseError> {
        for i in 0..self.toks.len() {
            match self.toks[i].text.as_str() {
                "(" if self.toks[i].kind == TokKind::Punct => self.top().paren += 1,
                ")" if self.toks[i].kind == TokKind::Punct => {
                    let f = self.top();
                    f.paren = (f.paren - 1).max(0);
                }
                ";" if self.toks[i].kind == TokKind::Punct && self.top().paren == 0 => {
                    self.statement_end(i);
                }
                "{" if self.toks[i].kind == TokKind::Punct => self.open(i),
                "}" if self.toks[i].kind == TokKind::Punct => self.close(i)?,
                "->" => self.lambda_params(i),
                _ => {}
            }
        }
        if self.stack.len() > 1 {
            let line = self.toks.last().map(|t| t.line).unwrap_or(1);
            return Err(ParseError {
                line,
                reason: "unclosed brace at end of file".into(),
            });
        }
        Ok(())
    }

    /// Header token indices with annotations removed (and marked not-use).
    fn strip_annotations(&mut self, from: usize, to: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut i = from;
        while i < to {
            if self.is(i, "@") && !self.is(i + 1, "interface") {
                self.not_use[i] = true;
                i += 1;
                if i < to && self.toks[i].is_ident() {
                    self.not_use[i] = true;
                    i += 1;
                }
                while i + 1 < to && self.is(i, ".") && self.toks[i + 1].is_ident() {
                    self.not_use[i + 1] = true;
                    i += 2;
                }
                if i < to && self.is(i, "(") {
                    let close = self.matching(i, to).unwrap_or(to - 1);
                    i = close + 1;
                }
                continue;
            }
            if self.is(i, "@") {
                i += 1;
                continue;
            }
            out.push(i);
            i += 1;
        }
        out
    }

    /// Drops leading `label:`, `case ...:` / `case ... ->` and `default:`.
    fn strip_labels(&self, h: &[usize]) -> usize {
        let mut k = 0;
        loop {
            if k < h.len() && (self.is(h[k], "case") || self.is(h[k], "default")) {
                let mut j = k + 1;
                let mut depth = 0;
                while j < h.len() {
                    let t = &self.toks[h[j]];
                    if t.is("(") {
                        depth += 1;
                    } else if t.is(")") {
                        depth -= 1;
                    } else if depth == 0 && (t.is(":") || t.is("->")) {
                        break;
                    }
                    j += 1;
                }
                if j >= h.len() {
                    return k;
                }
                k = j + 1;
                continue;
            }
            if k + 1 < h.len() && self.is_name(h[k]) && self.is(h[k + 1], ":") {
                k += 2;
                continue;
            }
            return k;
        }
    }

    /// Index of the token closing the bracket opened at `open`.
    fn matching(&self, open: usize, limit: usize) -> Option<usize> {
        let (o, c) = match self.toks[open].text.as_str() {
            "(" => ("(", ")"),
            "[" => ("[", "]"),
            "{" => ("{", "}"),
            "<" => ("<", ">"),
            _ => return None,
        };
        let mut depth = 0;
        for j in open..limit.min(self.toks.len()) {
            if self.is(j, o) {
                depth += 1;
            } else if self.is(j, c) {
                depth -= 1;
                if depth == 0 {
                    return Some(j);
                }
            }
        }
        None
    }

    fn matching_back(&self, close: usize, floor: usize) -> Option<usize> {
        let mut depth = 0;
        let mut j = close + 1;
        while j > floor {
            j -= 1;
            if self.is(j, ")") {
                depth += 1;
            } else if self.is(j, "(") {
                depth -= 1;
                if depth == 0 {
                    return Some(j);
                }
            }
        }
        None
    }

    fn render(&self, idx: &[usize]) -> String {
        let mut out = String::new();
        let wordy = |t: &Token| t.kind != TokKind::Punct || t.text == "?";
        for (n, &i) in idx.iter().enumerate() {
            let t = &self.toks[i];
            if n > 0 {
                let prev = &self.toks[idx[n - 1]];
                if ((wordy(prev) || prev.is("]") || prev.is(")") || prev.is(">")) && wordy(t))
                    || prev.is(",")
                    || t.is("|")
                    || prev.is("|")
                {
                    out.push(' ');
                }
            }
            out.push_str(&t.text);
        }
        out
    }

    fn line_of_header(&self, h: &[usize], brace: usize) -> u32 {
        h.first().map(|&i| self.toks[i].line).unwrap_or(self.toks[brace].line)
    }

    fn decl_start(&self, h: &[usize], brace: usize) -> u32 {
        let l = self.line_of_header(h, brace);
        self.raw_start.map_or(l, |r| r.min(l))
    }

    fn add_var(
        &mut self,
        name_tok: usize,
        type_text: Option<String>,
        modifiers: Vec<String>,
        kind: VarKind,
        scope_start: u32,
        class: Option<usize>,
        method: Option<usize>,
    ) -> usize {
        self.not_use[name_tok] = true;
        self.out.vars.push(VarDecl {
            name: self.toks[name_tok].text.clone(),
            type_text,
            modifiers,
            kind,
            line: self.toks[name_tok].line,
            scope: Span::new(scope_start, u32::MAX),
            class,
            method,
        });
        self.out.vars.len() - 1
    }

    /// `mods Type name [= init] (, name [= init])*`. Returns modifiers,
    /// rendered type and the name token indices.
    fn declarators(&self, h: &[usize], allow_mods: bool) -> Option<(Vec<String>, String, Vec<usize>)> {
        let mut k = 0;
        let mut mods = Vec::new();
        while k < h.len()
            && (allow_mods || self.is(h[k], "final"))
            && MODIFIERS.contains(&self.toks[h[k]].text.as_str())
        {
            mods.push(self.toks[h[k]].text.clone());
            k += 1;
        }
        let t0 = k;
        let first = self.toks.get(*h.get(k)?)?;
        if !(first.is_ident() && (!is_keyword(&first.text) || PRIMITIVES.contains(&first.text.as_str()))) {
            return None;
        }
        k += 1;
        while k + 1 < h.len() && self.is(h[k], ".") && self.is_name(h[k + 1]) {
            k += 2;
        }
        if k < h.len() && self.is(h[k], "<") {
            let mut depth = 0;
            while k < h.len() {
                if self.is(h[k], "<") {
                    depth += 1;
                } else if self.is(h[k], ">") {
                    depth -= 1;
                } else if !(self.toks[h[k]].is_ident()
                    || self.is(h[k], ",")
                    || self.is(h[k], ".")
                    || self.is(h[k], "?")
                    || self.is(h[k], "[")
                    || self.is(h[k], "]")
                    || self.is(h[k], "&"))
                {
                    return None;
                }
                k += 1;
                if depth == 0 {
                    break;
                }
            }
            if depth != 0 {
                return None;
            }
        }
        while k + 1 < h.len() && self.is(h[k], "[") && self.is(h[k + 1], "]") {
            k += 2;
        }
        if k < h.len() && self.is(h[k], "...") {
            k += 1;
        }
        let type_text = self.render(&h[t0..k]);
        if !self.is_name(*h.get(k)?) {
            return None;
        }
        let mut names = vec![h[k]];
        k += 1;
        loop {
            while k + 1 < h.len() && self.is(h[k], "[") && self.is(h[k + 1], "]") {
                k += 2;
            }
            if k >= h.len() || self.is(h[k], ":") {
                break;
            }
            if self.is(h[k], "=") {
                let mut depth = 0i32;
                while k < h.len() {
                    let t = &self.toks[h[k]];
                    if t.is("(") || t.is("[") || t.is("{") {
                        depth += 1;
                    } else if t.is(")") || t.is("]") || t.is("}") {
                        depth -= 1;
                    } else if depth == 0 && t.is(",") {
                        break;
                    }
                    k += 1;
                }
                continue;
            }
            if self.is(h[k], ",") && k + 1 < h.len() && self.is_name(h[k + 1]) {
                names.push(h[k + 1]);
                k += 2;
                continue;
            }
            return None;
        }
        Some((mods, type_text, names))
    }

    fn enclosing_class(&self) -> Option<usize> {
        self.stack.last().and_then(|f| f.class)
    }

    fn enclosing_method(&self) -> Option<usize> {
        self.stack.last().and_then(|f| f.method)
    }

    fn statement_end(&mut self, i: usize) {
        let (hs, kind) = {
            let f = self.stack.last().expect("frame");
            (f.header_start, f.kind)
        };
        if let Some(b) = self.top().pending_do.take() {
            self.out.blocks[b].span.end = self.toks[i].line;
        }
        match kind {
            FrameKind::Root => {
                if self.is(hs, "package") || self.is(hs, "import") {
                    for j in hs..i {
                        self.not_use[j] = true;
                    }
                    if self.is(hs, "package") {
                        let idx: Vec<usize> = (hs + 1..i).collect();
                        self.out.package = Some(self.render(&idx));
                    }
                }
            }
            FrameKind::Class(c) => {
                let h = self.strip_annotations(hs, i);
                if !self.abstract_method(&h, i, c) {
                    if let Some((mods, ty, names)) = self.declarators(&h, true) {
                        for n in names {
                            let v = self.add_var(n, Some(ty.clone()), mods.clone(), VarKind::Field, 0, Some(c), None);
                            self.top().pending_vars.push(v);
                        }
                    }
                }
            }
            FrameKind::Method(_) | FrameKind::Code | FrameKind::Lambda => {
                let h = self.strip_annotations(hs, i);
                let k = self.strip_labels(&h);
                if let Some((mods, ty, names)) = self.declarators(&h[k..], false) {
                    let (class, method) = (self.enclosing_class(), self.enclosing_method());
                    for n in names {
                        let line = self.toks[n].line;
                        let v = self.add_var(n, Some(ty.clone()), mods.clone(), VarKind::Local, line, class, method);
                        self.top().pending_vars.push(v);
                    }
                }
            }
            FrameKind::ArrayInit => {}
        }
        let f = self.top();
        f.header_start = i + 1;
        f.chain = None;
    }

    /// Interface or abstract method ending in `;`.
    fn abstract_method(&mut self, h: &[usize], semi: usize, class: usize) -> bool {
        let Some(p) = h.iter().position(|&j| self.is(j, "(") || self.is(j, "=")) else {
            return false;
        };
        if !self.is(h[p], "(") || p < 2 || !self.is_name(h[p - 1]) {
            return false;
        }
        let before = &self.toks[h[p - 2]];
        if !(before.is_ident() || before.is(">") || before.is("]")) {
            return false;
        }
        let start = self.toks[self.stack.last().map_or(h[0], |f| f.header_start)].line;
        let end = self.toks[semi].line;
        self.method_decl(h, p, Some(class), Span::new(start, end), false);
        true
    }

    /// Records a method whose name is `h[p - 1]` and parameter list opens at
    /// `h[p]`. Returns its index and the parameter name tokens.
    fn method_decl(
        &mut self,
        h: &[usize],
        p: usize,
        class: Option<usize>,
        span: Span,
        has_body: bool,
    ) -> (usize, Vec<(usize, String)>) {
        let name_tok = h[p - 1];
        self.not_use[name_tok] = true;
        let open = h[p];
        let close = self
            .matching(open, h.last().map(|x| x + 1).unwrap_or(open + 1))
            .unwrap_or(open);
        let params = self.split_params(open, close);
        let name = self.toks[name_tok].text.clone();
        let is_constructor = class.is_some_and(|c| self.out.classes[c].name == name);
        let sig_end = h.iter().position(|&j| j == close).map(|x| x + 1).unwrap_or(h.len());
        let mut sig_idx: Vec<usize> = h[..sig_end].to_vec();
        if let Some(t) = h.iter().position(|&j| self.is(j, "throws")) {
            sig_idx.extend_from_slice(&h[t..]);
        }
        let signature = self.render(&sig_idx);
        let qualified_name = match class {
            Some(c) => format!("{}.{}", self.out.classes[c].qualified_name, name),
            None => name.clone(),
        };
        self.out.methods.push(MethodDecl {
            name,
            qualified_name,
            class,
            params: params
                .iter()
                .map(|(n, ty)| Param {
                    name: self.toks[*n].text.clone(),
                    type_text: ty.clone(),
                })
                .collect(),
            signature,
            name_line: self.toks[name_tok].line,
            span,
            has_body,
            is_constructor,
        });
        for (n, _) in &params {
            self.not_use[*n] = true;
        }
        (self.out.methods.len() - 1, params)
    }

    /// `Name {` inside a record: the canonical constructor, whose parameters
    /// are the record components and are not declared again.
    fn compact_constructor(&mut self, h: &[usize], name_tok: usize, class: usize, brace: usize) {
        self.not_use[name_tok] = true;
        let start = self.decl_start(h, brace);
        let params = self
            .out
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::RecordComponent && v.class == Some(class))
            .map(|v| Param {
                name: v.name.clone(),
                type_text: v.type_text.clone().unwrap_or_default(),
            })
            .collect();
        let name = self.toks[name_tok].text.clone();
        self.out.methods.push(MethodDecl {
            qualified_name: format!("{}.{}", self.out.classes[class].qualified_name, name),
            name,
            class: Some(class),
            params,
            signature: self.render(h),
            name_line: self.toks[name_tok].line,
            span: Span::new(start, u32::MAX),
            has_body: true,
            is_constructor: true,
        });
        let m = self.out.methods.len() - 1;
        self.out.blocks.push(Block {
            kind: BlockKind::MethodBody,
            span: Span::new(start, u32::MAX),
        });
        let mut f = Frame::new(FrameKind::Method(m), brace + 1, Some(class), Some(m));
        f.block = Some(self.out.blocks.len() - 1);
        self.stack.push(f);
    }

    /// Splits `( ... )` into (name token, rendered type) pairs.
    fn split_params(&mut self, open: usize, close: usize) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        if close <= open + 1 {
            return out;
        }
        let mut seg_start = open + 1;
        let mut depth = 0i32;
        for j in open + 1..=close {
            let t = &self.toks[j];
            if j == close || (depth == 0 && t.is(",")) {
                let seg = self.strip_annotations(seg_start, j);
                let seg: Vec<usize> = seg.into_iter().filter(|&x| !self.is(x, "final")).collect();
                if let Some((&last, rest)) = seg.split_last() {
                    if self.toks[last].is_ident() {
                        out.push((last, self.render(rest)));
                    }
                }
                seg_start = j + 1;
                continue;
            }
            if t.is("(") || t.is("<") || t.is("[") {
                depth += 1;
            } else if t.is(")") || t.is(">") || t.is("]") {
                depth -= 1;
            }
        }
        out
    }

    fn type_decl_at(&self, h: &[usize]) -> Option<(usize, ClassKind)> {
        for (k, &j) in h.iter().enumerate() {
            let prev_dot = k > 0 && self.is(h[k - 1], ".");
            let kind = match self.toks[j].text.as_str() {
                "class" if !prev_dot => ClassKind::Class,
                "interface" if k > 0 && self.is(h[k - 1], "@") => ClassKind::Annotation,
                "interface" => ClassKind::Interface,
                "enum" => ClassKind::Enum,
                "record" if k + 1 < h.len() && self.is_name(h[k + 1]) => ClassKind::Record,
                _ => continue,
            };
            if k + 1 < h.len() && self.is_name(h[k + 1]) {
                return Some((k, kind));
            }
        }
        None
    }

    fn push_class(&mut self, h: &[usize], k: usize, kind: ClassKind, brace: usize) {
        let name_tok = h[k + 1];
        self.not_use[name_tok] = true;
        let name = self.toks[name_tok].text.clone();
        let outer = self.enclosing_class();
        let qualified_name = match (outer, &self.out.package) {
            (Some(o), _) => format!("{}.{}", self.out.classes[o].qualified_name, name),
            (None, Some(p)) => format!("{p}.{name}"),
            (None, None) => name.clone(),
        };
        let extends = h.iter().position(|&j| self.is(j, "extends")).and_then(|e| {
            let mut last = None;
            let mut m = e + 1;
            while m < h.len() && (self.toks[h[m]].is_ident() || self.is(h[m], ".")) {
                if self.toks[h[m]].is_ident() {
                    last = Some(self.toks[h[m]].text.clone());
                }
                m += 1;
            }
            last
        });
        let start = self.decl_start(h, brace);
        self.out.classes.push(ClassDecl {
            name,
            qualified_name,
            kind,
            name_line: self.toks[name_tok].line,
            span: Span::new(start, u32::MAX),
            extends,
            outer,
        });
        let c = self.out.classes.len() - 1;
        let mut frame = Frame::new(FrameKind::Class(c), brace + 1, Some(c), None);
        if kind == ClassKind::Record {
            if let Some(p) = (k + 2..h.len()).find(|&m| self.is(h[m], "(")) {
                let close = self.matching(h[p], brace).unwrap_or(h[p]);
                for (n, ty) in self.split_params(h[p], close) {
                    let v = self.add_var(
                        n,
                        Some(ty),
                        vec!["private".into(), "final".into()],
                        VarKind::RecordComponent,
                        0,
                        Some(c),
                        None,
                    );
                    frame.pending_vars.push(v);
                }
            }
        }
        self.stack.push(frame);
    }

    fn push_block(&mut self, kind: BlockKind, start: u32, brace: usize) -> usize {
        self.out.blocks.push(Block {
            kind,
            span: Span::new(start, u32::MAX),
        });
        let b = self.out.blocks.len() - 1;
        let mut f = Frame::new(
            FrameKind::Code,
            brace + 1,
            self.enclosing_class(),
            self.enclosing_method(),
        );
        f.block = Some(b);
        self.stack.push(f);
        b
    }

    fn push_plain(&mut self, kind: FrameKind, brace: usize) {
        let mut f = Frame::new(kind, brace + 1, self.enclosing_class(), self.enclosing_method());
        f.statement = false;
        self.stack.push(f);
    }

    fn is_anonymous_class(&self, h: &[usize]) -> Option<usize> {
        let last = *h.last()?;
        if !self.is(last, ")") {
            return None;
        }
        let open = self.matching_back(last, h[0])?;
        let mut j = open.checked_sub(1)?;
        if self.is(j, ">") {
            let mut depth = 0;
            loop {
                if self.is(j, ">") {
                    depth += 1;
                } else if self.is(j, "<") {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                j = j.checked_sub(1)?;
            }
            j = j.checked_sub(1)?;
        }
        if !self.is_name(j) {
            return None;
        }
        let type_tok = j;
        while j >= 2 && self.is(j - 1, ".") && self.is_name(j - 2) {
            j -= 2;
        }
        (j >= 1 && self.is(j - 1, "new") && j > h[0]).then_some(type_tok)
    }

    fn push_anonymous(&mut self, type_tok: usize, brace: usize) {
        let outer = self.enclosing_class();
        let name = self.toks[type_tok].text.clone();
        let qualified_name = match outer {
            Some(o) => format!("{}.<anonymous {}>", self.out.classes[o].qualified_name, name),
            None => format!("<anonymous {name}>"),
        };
        let line = self.toks[brace].line;
        self.out.classes.push(ClassDecl {
            name,
            qualified_name,
            kind: ClassKind::Anonymous,
            name_line: line,
            span: Span::new(line, u32::MAX),
            extends: None,
            outer,
        });
        let c = self.out.classes.len() - 1;
        let mut f = Frame::new(FrameKind::Class(c), brace + 1, Some(c), None);
        f.statement = false;
        self.stack.push(f);
    }

    fn open(&mut self, brace: usize) {
        let (hs, ctx_class, in_parens, kind, chain) = {
            let f = self.stack.last().expect("frame");
            (f.header_start, f.is_class_context(), f.paren > 0, f.kind, f.chain)
        };
        if kind == FrameKind::ArrayInit {
            self.push_plain(FrameKind::ArrayInit, brace);
            return;
        }
        self.raw_start = (hs < brace).then(|| self.toks[hs].line);
        let h = self.strip_annotations(hs, brace);

        if ctx_class && !in_parens {
            self.open_in_class(&h, brace);
            return;
        }

        let k = self.strip_labels(&h);
        let stmt = &h[k..];
        let last = h.last().copied();
        let case_rule = k > 0 && (self.is(h[0], "case") || self.is(h[0], "default")) && stmt.is_empty();
        if case_rule {
            let start = self.line_of_header(&h, brace);
            self.push_block(BlockKind::Bare, start, brace);
            return;
        }
        if let Some(l) = last {
            if self.is(l, "->") {
                let line = self.toks[l].line;
                self.out.blocks.push(Block {
                    kind: BlockKind::Lambda,
                    span: Span::new(line, u32::MAX),
                });
                let b = self.out.blocks.len() - 1;
                let mut f = Frame::new(
                    FrameKind::Lambda,
                    brace + 1,
                    self.enclosing_class(),
                    self.enclosing_method(),
                );
                f.block = Some(b);
                f.statement = false;
                self.stack.push(f);
                return;
            }
            if let Some(type_tok) = self.is_anonymous_class(&h) {
                self.push_anonymous(type_tok, brace);
                return;
            }
            let t = &self.toks[l];
            if t.is("=") || t.is("]") || t.is(",") || t.is("(") || t.is("return") || in_parens {
                self.push_plain(FrameKind::ArrayInit, brace);
                return;
            }
        }

        if let Some((tk, ck)) = self.type_decl_at(stmt) {
            self.push_class(stmt, tk, ck, brace);
            return;
        }

        let start = self.line_of_header(stmt, brace);
        let first = stmt.first().map(|&j| self.toks[j].text.as_str()).unwrap_or("");
        match first {
            "else" => match chain {
                Some(b) if self.out.blocks[b].kind == BlockKind::If => self.continue_block(b, brace),
                _ => {
                    self.push_block(BlockKind::Bare, start, brace);
                }
            },
            "catch" | "finally" => {
                let b = match chain {
                    Some(b) if self.out.blocks[b].kind == BlockKind::Try => {
                        self.continue_block(b, brace);
                        b
                    }
                    _ => self.push_block(BlockKind::Try, start, brace),
                };
                let _ = b;
                if first == "catch" && stmt.len() > 1 && self.is(stmt[1], "(") {
                    let close = self.matching(stmt[1], brace).unwrap_or(stmt[1]);
                    let inner: Vec<usize> = (stmt[1] + 1..close).collect();
                    if let Some(&name) = inner.last() {
                        if self.is_name(name) {
                            let ty = self.render(&inner[..inner.len() - 1]);
                            let (class, method) = (self.enclosing_class(), self.enclosing_method());
                            let v = self.add_var(name, Some(ty), vec![], VarKind::CatchParam, start, class, method);
                            self.top().pending_vars.push(v);
                        }
                    }
                }
            }
            "if" => {
                self.push_block(BlockKind::If, start, brace);
            }
            "for" => {
                self.push_block(BlockKind::For, start, brace);
                if stmt.len() > 1 && self.is(stmt[1], "(") {
                    let close = self.matching(stmt[1], brace).unwrap_or(stmt[1]);
                    let mut inner: Vec<usize> = Vec::new();
                    let mut depth = 0;
                    for j in stmt[1] + 1..close {
                        if self.is(j, "(") {
                            depth += 1;
                        } else if self.is(j, ")") {
                            depth -= 1;
                        }
                        if depth == 0 && self.is(j, ";") {
                            break;
                        }
                        inner.push(j);
                    }
                    self.local_decls(&inner, VarKind::Local, start);
                }
            }
            "while" => {
                self.push_block(BlockKind::While, start, brace);
            }
            "do" => {
                self.push_block(BlockKind::Do, start, brace);
            }
            "try" => {
                self.push_block(BlockKind::Try, start, brace);
                if stmt.len() > 1 && self.is(stmt[1], "(") {
                    let close = self.matching(stmt[1], brace).unwrap_or(stmt[1]);
                    let mut seg = Vec::new();
                    for j in stmt[1] + 1..=close {
                        if j == close || self.is(j, ";") {
                            let s = std::mem::take(&mut seg);
                            self.local_decls(&s, VarKind::Resource, start);
                        } else {
                            seg.push(j);
                        }
                    }
                }
            }
            "switch" => {
                self.push_block(BlockKind::Switch, start, brace);
            }
            "synchronized" => {
                self.push_block(BlockKind::Synchronized, start, brace);
            }
            "static" if stmt.len() == 1 => {
                self.push_block(BlockKind::Initializer, start, brace);
            }
            _ => {
                self.push_block(BlockKind::Bare, start, brace);
            }
        }
    }

    fn local_decls(&mut self, h: &[usize], kind: VarKind, scope_start: u32) {
        let h = self.strip_annotations_list(h);
        if let Some((mods, ty, names)) = self.declarators(&h, false) {
            let (class, method) = (self.enclosing_class(), self.enclosing_method());
            for n in names {
                let v = self.add_var(n, Some(ty.clone()), mods.clone(), kind, scope_start, class, method);
                self.top().pending_vars.push(v);
            }
        }
    }

    fn strip_annotations_list(&mut self, h: &[usize]) -> Vec<usize> {
        match (h.first(), h.last()) {
            (Some(&a), Some(&b)) if b + 1 - a == h.len() => self.strip_annotations(a, b + 1),
            _ => h.to_vec(),
        }
    }

    fn continue_block(&mut self, b: usize, brace: usize) {
        let mut f = Frame::new(
            FrameKind::Code,
            brace + 1,
            self.enclosing_class(),
            self.enclosing_method(),
        );
        f.block = Some(b);
        self.stack.push(f);
    }

    fn open_in_class(&mut self, h: &[usize], brace: usize) {
        if let Some((k, kind)) = self.type_decl_at(h) {
            self.push_class(h, k, kind, brace);
            return;
        }
        let class = self.enclosing_class();
        let eq = h.iter().position(|&j| self.is(j, "="));
        let paren = h.iter().position(|&j| self.is(j, "("));
        if let Some(p) = paren {
            if eq.is_none_or(|e| p < e) && p >= 1 && self.is_name(h[p - 1]) {
                let has_type = p >= 2 && {
                    let b = &self.toks[h[p - 2]];
                    b.is_ident() || b.is(">") || b.is("]")
                };
                let is_ctor = class.is_some_and(|c| self.out.classes[c].name == self.toks[h[p - 1]].text);
                if has_type || is_ctor {
                    let start = self.decl_start(h, brace);
                    let (m, params) = self.method_decl(h, p, class, Span::new(start, u32::MAX), true);
                    self.out.blocks.push(Block {
                        kind: BlockKind::MethodBody,
                        span: Span::new(start, u32::MAX),
                    });
                    let b = self.out.blocks.len() - 1;
                    let mut f = Frame::new(FrameKind::Method(m), brace + 1, class, Some(m));
                    f.block = Some(b);
                    self.stack.push(f);
                    for (n, ty) in params {
                        let v = self.add_var(n, Some(ty), vec![], VarKind::Param, start, class, Some(m));
                        self.top().pending_vars.push(v);
                    }
                    return;
                }
            }
        }
        if h.is_empty() || (h.len() == 1 && self.is(h[0], "static")) {
            let start = self.line_of_header(h, brace);
            self.push_block(BlockKind::Initializer, start, brace);
            return;
        }
        if let Some(c) = class.filter(|&c| self.out.classes[c].kind == ClassKind::Record) {
            let bare = self.strip_annotations_list(h);
            if let Some((&name, mods)) = bare.split_last() {
                if self.toks[name].text == self.out.classes[c].name
                    && mods.iter().all(|&j| MODIFIERS.contains(&self.toks[j].text.as_str()))
                {
                    self.compact_constructor(h, name, c, brace);
                    return;
                }
            }
        }
        if let Some(type_tok) = self.is_anonymous_class(h) {
            self.push_anonymous(type_tok, brace);
            return;
        }
        if eq.is_some() {
            self.push_plain(FrameKind::ArrayInit, brace);
            return;
        }
        // enum constant with a body
        let type_tok = h.iter().copied().find(|&j| self.is_name(j)).unwrap_or(h[0]);
        self.push_anonymous(type_tok, brace);
    }

    fn close(&mut self, i: usize) -> Result<(), ParseError> {
        if self.stack.len() == 1 {
            return Err(ParseError {
                line: self.toks[i].line,
                reason: "unbalanced closing brace".into(),
            });
        }
        let f = self.stack.pop().expect("frame");
        let line = self.toks[i].line;
        if let Some(b) = f.block {
            self.out.blocks[b].span.end = line;
        }
        match f.kind {
            FrameKind::Class(c) => self.out.classes[c].span.end = line,
            FrameKind::Method(m) => self.out.methods[m].span.end = line,
            _ => {}
        }
        for v in f.pending_vars {
            let var = &mut self.out.vars[v];
            var.scope.end = line;
            if var.kind == VarKind::Field || var.kind == VarKind::RecordComponent {
                var.scope.start = match f.kind {
                    FrameKind::Class(c) => self.out.classes[c].span.start,
                    _ => var.line,
                };
            }
        }
        let parent = self.top();
        if f.statement {
            parent.header_start = i + 1;
            let chainable = f.block.filter(|_| f.kind == FrameKind::Code);
            parent.chain = None;
            parent.pending_do = None;
            if let Some(b) = chainable {
                match self.out.blocks[b].kind {
                    BlockKind::If | BlockKind::Try => self.top().chain = Some(b),
                    BlockKind::Do => self.top().pending_do = Some(b),
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn lambda_params(&mut self, arrow: usize) {
        if self.stack.last().is_some_and(|f| f.is_class_context() && f.paren == 0) {
            return;
        }
        let hs = self.stack.last().map(|f| f.header_start).unwrap_or(0);
        if self.is(hs, "case") || self.is(hs, "default") {
            // switch rule arrow, unless this arrow sits inside parentheses
            let f = self.stack.last().expect("frame");
            if f.paren == 0 {
                return;
            }
        }
        let Some(prev) = arrow.checked_sub(1) else { return };
        let line = self.toks[arrow].line;
        let (class, method) = (self.enclosing_class(), self.enclosing_method());
        if self.is_name(prev) {
            let v = self.add_var(prev, None, vec![], VarKind::LambdaParam, line, class, method);
            self.top().pending_vars.push(v);
        } else if self.is(prev, ")") {
            let Some(open) = self.matching_back(prev, hs) else {
                return;
            };
            for (n, ty) in self.split_params(open, prev) {
                let ty = (!ty.is_empty()).then_some(ty);
                let v = self.add_var(n, ty, vec![], VarKind::LambdaParam, line, class, method);
                self.top().pending_vars.push(v);
            }
        }
    }

    fn count_args(&self, open: usize) -> usize {
        let Some(close) = self.matching(open, self.toks.len()) else {
            return 0;
        };
        if close == open + 1 {
            return 0;
        }
        let mut depth = 0;
        let mut commas = 0;
        for j in open + 1..close {
            let t = &self.toks[j];
            if t.is("(") || t.is("[") || t.is("{") {
                depth += 1;
            } else if t.is(")") || t.is("]") || t.is("}") {
                depth -= 1;
            } else if depth == 0 && t.is(",") {
                commas += 1;
            }
        }
        commas + 1
    }

    fn constructor_call(&self, i: usize) -> bool {
        let mut j = i;
        while j >= 2 && self.is(j - 1, ".") && self.is_name(j - 2) {
            j -= 2;
        }
        j >= 1 && self.is(j - 1, "new")
    }

    fn collect_uses(&mut self) {
        for i in 0..self.toks.len() {
            if !self.is_name(i) || self.not_use[i] {
                continue;
            }
            if i >= 1 && (self.is(i - 1, "@") || self.is(i - 1, "::")) {
                continue;
            }
            let qualifier = if i >= 1 && self.is(i - 1, ".") {
                Some(match i.checked_sub(2).map(|q| &self.toks[q]) {
                    Some(q) if q.is_ident() => q.text.clone(),
                    _ => String::new(),
                })
            } else {
                None
            };
            let name = self.toks[i].text.clone();
            let line = self.toks[i].line;
            if self.is(i + 1, "(") {
                if self.constructor_call(i) {
                    continue;
                }
                self.out.invocations.push(Invocation {
                    name,
                    arity: self.count_args(i + 1),
                    line,
                    qualifier,
                });
            } else {
                self.out.idents.push(IdentUse { name, line, qualifier });
            }
        }
    }
}
