use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use super::model::{ChangeKind, CommitDiff, FileDiff, Hunk, HunkLine, LineTag};
use super::DiffError;

static HUNK_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@ ?(.*)$").unwrap());

const DEV_NULL: &str = "/dev/null";
const NO_NEWLINE: &str = "\\ No newline at end of file";

/// Parses unified diff text (as printed by `git diff`, `git show` or plain
/// `diff -u`) into a [`CommitDiff`].
///
/// Text before the first file section is ignored. Binary files are kept with
/// their headers and zero hunks.
pub fn parse_unified_diff(text: &str) -> Result<CommitDiff, DiffError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut files: Vec<FileDiff> = Vec::new();
    let mut i = 0;

    while i < lines.len() {
        let line = lines[i];
        if line.starts_with("diff --git ") {
            let (file, next) = parse_git_section(&lines, i)?;
            files.push(file);
            i = next;
        } else if is_plain_file_start(&lines, i) {
            let (file, next) = parse_plain_section(&lines, i)?;
            files.push(file);
            i = next;
        } else if files.is_empty() {
            // preamble (commit header, stat block, ...)
            i += 1;
        } else if line.is_empty() {
            i += 1;
        } else {
            return Err(DiffError::malformed(i + 1, "unexpected line between file sections"));
        }
    }

    if files.is_empty() {
        return Err(DiffError::EmptyDiff);
    }

    let mut seen = HashSet::new();
    for f in &files {
        if !seen.insert(f.path().to_string()) {
            return Err(DiffError::DuplicatePath(f.path().to_string()));
        }
    }

    Ok(CommitDiff {
        repo_id: String::new(),
        commit_id: None,
        files,
        raw_text: text.to_string(),
    })
}

fn is_plain_file_start(lines: &[&str], i: usize) -> bool {
    lines[i].starts_with("--- ") && lines.get(i + 1).is_some_and(|l| l.starts_with("+++ "))
}

#[derive(Default)]
struct SectionHeader {
    old: Option<Option<String>>,
    new: Option<Option<String>>,
    rename_from: Option<String>,
    rename_to: Option<String>,
    new_file: bool,
    deleted_file: bool,
    copy: bool,
    binary: bool,
}

fn parse_git_section(lines: &[&str], start: usize) -> Result<(FileDiff, usize), DiffError> {
    let mut headers = vec![lines[start].to_string()];
    let (git_a, git_b) = split_git_header(&lines[start]["diff --git ".len()..]);
    let mut h = SectionHeader::default();
    let mut i = start + 1;

    while i < lines.len() {
        let line = lines[i];
        if line.starts_with("diff --git ") || line.starts_with("@@ ") {
            break;
        }
        if let Some(rest) = line.strip_prefix("--- ") {
            h.old = Some(header_path(rest));
        } else if let Some(rest) = line.strip_prefix("+++ ") {
            h.new = Some(header_path(rest));
        } else if line.starts_with("new file mode") {
            h.new_file = true;
        } else if line.starts_with("deleted file mode") {
            h.deleted_file = true;
        } else if let Some(rest) = line.strip_prefix("rename from ") {
            h.rename_from = Some(unquote(rest));
        } else if let Some(rest) = line.strip_prefix("rename to ") {
            h.rename_to = Some(unquote(rest));
        } else if line.starts_with("copy from ") || line.starts_with("copy to ") {
            h.copy = true;
        } else if line.starts_with("Binary files ") || line == "GIT binary patch" {
            h.binary = true;
        }
        headers.push(line.to_string());
        i += 1;
    }

    let old_default = git_a.map(|p| strip_prefix_dir(&p, "a/"));
    let new_default = git_b.map(|p| strip_prefix_dir(&p, "b/"));
    let old_path = match &h.old {
        Some(p) => p.clone(),
        None => h.rename_from.clone().or(old_default),
    };
    let new_path = match &h.new {
        Some(p) => p.clone(),
        None => h.rename_to.clone().or(new_default),
    };

    let (change_kind, old_path, new_path) = classify(&h, old_path, new_path);
    let mut file = FileDiff {
        old_path,
        new_path,
        change_kind,
        headers,
        binary: h.binary,
        hunks: Vec::new(),
    };
    if !file.binary {
        i = parse_hunks(lines, i, &mut file)?;
    }
    Ok((file, i))
}

fn parse_plain_section(lines: &[&str], start: usize) -> Result<(FileDiff, usize), DiffError> {
    let old = header_path(&lines[start][4..]);
    let new = header_path(&lines[start + 1][4..]);
    let h = SectionHeader::default();
    let (change_kind, old_path, new_path) = classify(&h, old, new);
    let mut file = FileDiff {
        old_path,
        new_path,
        change_kind,
        headers: vec![lines[start].to_string(), lines[start + 1].to_string()],
        binary: false,
        hunks: Vec::new(),
    };
    let next = parse_hunks(lines, start + 2, &mut file)?;
    Ok((file, next))
}

fn classify(
    h: &SectionHeader,
    old: Option<String>,
    new: Option<String>,
) -> (ChangeKind, Option<String>, Option<String>) {
    if h.new_file || h.copy || old.is_none() {
        (ChangeKind::Added, None, new)
    } else if h.deleted_file || new.is_none() {
        (ChangeKind::Deleted, old, None)
    } else if h.rename_from.is_some() && h.rename_to.is_some() && old != new {
        (ChangeKind::Renamed, old, new)
    } else {
        (ChangeKind::Modified, old, new)
    }
}

fn parse_hunks(lines: &[&str], mut i: usize, file: &mut FileDiff) -> Result<usize, DiffError> {
    while i < lines.len() {
        let line = lines[i];
        if line.starts_with("diff --git ") || is_plain_file_start(lines, i) {
            break;
        }
        if !line.starts_with("@@ ") {
            if line.is_empty() {
                i += 1;
                continue;
            }
            let reason = if matches!(line.as_bytes()[0], b' ' | b'+' | b'-') {
                "hunk body longer than its header"
            } else {
                "expected hunk header"
            };
            return Err(DiffError::malformed(i + 1, reason));
        }
        let (hunk, next) = parse_hunk(lines, i)?;
        file.hunks.push(hunk);
        i = next;
    }
    Ok(i)
}

fn parse_hunk(lines: &[&str], start: usize) -> Result<(Hunk, usize), DiffError> {
    let caps = HUNK_HEADER
        .captures(lines[start])
        .ok_or_else(|| DiffError::malformed(start + 1, "bad hunk header"))?;
    let num = |idx: usize, default: u32| -> Result<u32, DiffError> {
        match caps.get(idx) {
            Some(m) => m
                .as_str()
                .parse()
                .map_err(|_| DiffError::malformed(start + 1, "hunk header number out of range")),
            None => Ok(default),
        }
    };
    let mut hunk = Hunk {
        old_start: num(1, 0)?,
        old_len: num(2, 1)?,
        new_start: num(3, 0)?,
        new_len: num(4, 1)?,
        section: caps.get(5).map(|m| m.as_str().to_string()).unwrap_or_default(),
        lines: Vec::new(),
    };

    let mut old_left = hunk.old_len;
    let mut new_left = hunk.new_len;
    let mut i = start + 1;
    while old_left > 0 || new_left > 0 {
        let Some(&line) = lines.get(i) else {
            return Err(DiffError::malformed(i, "hunk body shorter than its header"));
        };
        let (tag, text) = match line.as_bytes().first() {
            Some(b' ') => (LineTag::Context, &line[1..]),
            Some(b'+') => (LineTag::Added, &line[1..]),
            Some(b'-') => (LineTag::Removed, &line[1..]),
            // some tools strip the lone space of empty context lines
            None => (LineTag::Context, ""),
            Some(b'\\') => {
                mark_no_newline(&mut hunk, i)?;
                i += 1;
                continue;
            }
            Some(_) => return Err(DiffError::malformed(i + 1, "hunk body shorter than its header")),
        };
        match tag {
            LineTag::Context if old_left > 0 && new_left > 0 => {
                old_left -= 1;
                new_left -= 1;
            }
            LineTag::Removed if old_left > 0 => old_left -= 1,
            LineTag::Added if new_left > 0 => new_left -= 1,
            _ => return Err(DiffError::malformed(i + 1, "hunk line counts inconsistent with header")),
        }
        hunk.lines.push(HunkLine {
            tag,
            text: text.to_string(),
            no_newline: false,
        });
        i += 1;
    }
    if lines.get(i).is_some_and(|l| l.starts_with('\\')) {
        mark_no_newline(&mut hunk, i)?;
        i += 1;
    }
    Ok((hunk, i))
}

fn mark_no_newline(hunk: &mut Hunk, idx: usize) -> Result<(), DiffError> {
    match hunk.lines.last_mut() {
        Some(last) => {
            last.no_newline = true;
            Ok(())
        }
        None => Err(DiffError::malformed(
            idx + 1,
            &format!("`{NO_NEWLINE}` before any hunk line"),
        )),
    }
}

/// Path from a `---`/`+++` header, `None` for `/dev/null`.
fn header_path(rest: &str) -> Option<String> {
    let rest = rest.split('\t').next().unwrap_or(rest);
    let path = unquote(rest.trim_end());
    if path == DEV_NULL {
        return None;
    }
    Some(
        path.strip_prefix("a/")
            .or_else(|| path.strip_prefix("b/"))
            .unwrap_or(&path)
            .to_string(),
    )
}

fn strip_prefix_dir(path: &str, prefix: &str) -> String {
    path.strip_prefix(prefix).unwrap_or(path).to_string()
}

/// Splits the `a/x b/y` tail of a `diff --git` line.
fn split_git_header(rest: &str) -> (Option<String>, Option<String>) {
    if rest.starts_with('"') {
        if let Some(end) = closing_quote(rest) {
            let a = unquote(&rest[..=end]);
            let b = unquote(rest[end + 1..].trim_start());
            return (Some(a), Some(b));
        }
    }
    // Prefer the split where both halves name the same path.
    let candidates: Vec<usize> = rest.match_indices(" b/").map(|(i, _)| i).collect();
    for &idx in &candidates {
        let (a, b) = (&rest[..idx], &rest[idx + 1..]);
        if a.strip_prefix("a/") == b.strip_prefix("b/") {
            return (Some(a.to_string()), Some(b.to_string()));
        }
    }
    match candidates.first() {
        Some(&idx) => (Some(rest[..idx].to_string()), Some(rest[idx + 1..].to_string())),
        None => (None, None),
    }
}

fn closing_quote(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut i = 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => return Some(i),
            _ => i += 1,
        }
    }
    None
}

/// Undoes git's C-style path quoting.
fn unquote(s: &str) -> String {
    let Some(inner) = s.strip_prefix('"').and_then(|t| t.strip_suffix('"')) else {
        return s.to_string();
    };
    let mut bytes = Vec::with_capacity(inner.len());
    let mut it = inner.bytes().peekable();
    while let Some(b) = it.next() {
        if b != b'\\' {
            bytes.push(b);
            continue;
        }
        match it.next() {
            Some(b'n') => bytes.push(b'\n'),
            Some(b't') => bytes.push(b'\t'),
            Some(b'"') => bytes.push(b'"'),
            Some(b'\\') => bytes.push(b'\\'),
            Some(d @ b'0'..=b'7') => {
                let mut v = (d - b'0') as u32;
                for _ in 0..2 {
                    match it.peek() {
                        Some(&o @ b'0'..=b'7') => {
                            v = v * 8 + (o - b'0') as u32;
                            it.next();
                        }
                        _ => break,
                    }
                }
                bytes.push(v as u8);
            }
            Some(other) => bytes.push(other),
            None => {}
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}
