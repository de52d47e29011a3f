use super::{ContextError, ContextItem, ContextKind, Provenance};
use crate::diff::CommitDiff;

/// Java test-file convention: under a `test` directory, or named
/// `Test*.java`, `*Test.java` or `*Tests.java`.
pub fn is_test_path(path: &str) -> bool {
    let lower = path.to_ascii_lowercase();
    if lower.starts_with("test/")
        || lower.contains("/test/")
        || lower.starts_with("tests/")
        || lower.contains("/tests/")
    {
        return true;
    }
    let name = path.rsplit('/').next().unwrap_or(path);
    let stem = name.strip_suffix(".java").unwrap_or(name);
    let test_prefix = stem
        .strip_prefix("Test")
        .is_some_and(|rest| rest.chars().next().is_none_or(|c| c.is_ascii_uppercase()));
    test_prefix || stem.ends_with("Test") || stem.ends_with("Tests")
}

/// The changed file most worth describing: non-test before test, then most
/// changed lines, then path order.
pub fn rank_important_files(diff: &CommitDiff) -> Result<ContextItem, ContextError> {
    let best = diff
        .files
        .iter()
        .min_by(|a, b| {
            (is_test_path(a.path()), std::cmp::Reverse(a.churn()), a.path()).cmp(&(
                is_test_path(b.path()),
                std::cmp::Reverse(b.churn()),
                b.path(),
            ))
        })
        .ok_or(ContextError::EmptyDiff)?;
    let path = best.path();
    let test = is_test_path(path);
    let reason = if diff.files.len() == 1 {
        format!("the only file changed ({} lines changed)", best.churn())
    } else {
        let pool = if test { "test" } else { "non-test" };
        format!("most changed lines among {pool} files ({} lines changed)", best.churn())
    };
    Ok(ContextItem {
        kind: ContextKind::ImportantFileInfo,
        payload: format!("{path}: {reason}"),
        locator: None,
        provenance: Provenance::new("important_files")
            .with("churn", best.churn())
            .with("test", test),
    })
}
