use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{CorpusEntry, CorpusStore, Embedder, RetrievalError, UnitVector};
use crate::diff::CommitDiff;
use crate::scalar::Scalar;

pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalConfig {
    pub k: usize,
    pub diff_embedder: String,
    pub text_embedder: String,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k: DEFAULT_TOP_K,
            diff_embedder: "hash-256".into(),
            text_embedder: "hash-256".into(),
        }
    }
}

/// A corpus entry with its cosine similarity to the query.
#[derive(Debug, Clone, Copy)]
pub struct Retrieved<'a, S: Scalar> {
    /// Position of `entry` in the store.
    pub index: usize,
    pub entry: &'a CorpusEntry<S>,
    pub cosine: S,
}

/// Exhaustive top-`k` search by diff embedding; descending cosine, ties by
/// ascending `entry_id`. `k` larger than the corpus is clamped.
pub fn query_by_embedding<'a, S: Scalar>(
    query: &UnitVector<S>,
    store: &'a CorpusStore<S>,
    k: usize,
) -> Result<Vec<Retrieved<'a, S>>, RetrievalError> {
    if store.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let k = if k > store.len() {
        log::warn!(
            "retrieval k={k} exceeds corpus size {}; returning the whole corpus",
            store.len()
        );
        store.len()
    } else {
        k
    };
    let mut scored = store
        .entries
        .iter()
        .enumerate()
        .map(|(index, entry)| {
            Ok(Retrieved {
                cosine: query.cosine(&entry.diff_embedding)?,
                index,
                entry,
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    scored.sort_by(|a, b| {
        b.cosine
            .partial_cmp(&a.cosine)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.entry.entry_id.cmp(&b.entry.entry_id))
    });
    scored.truncate(k);
    Ok(scored)
}

/// A retrieved (diff, message) pair shown to the model as an example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub entry_id: String,
    pub diff_text: String,
    pub message_text: String,
}

impl<S: Scalar> From<&Retrieved<'_, S>> for Exemplar {
    fn from(r: &Retrieved<'_, S>) -> Self {
        Exemplar {
            entry_id: r.entry.entry_id.clone(),
            diff_text: r.entry.diff_text.clone(),
            message_text: r.entry.message_text.clone(),
        }
    }
}

pub fn query_similar<'a, S: Scalar>(
    target: &CommitDiff,
    store: &'a CorpusStore<S>,
    diff_embedder: &dyn Embedder<S>,
    cfg: &RetrievalConfig,
) -> Result<Vec<Retrieved<'a, S>>, RetrievalError> {
    if store.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    store.check_embedders(Some(diff_embedder), None)?;
    let query = diff_embedder.embed(&target.raw_text)?;
    query_by_embedding(&query, store, cfg.k)
}

/// Mean cosine between the candidate message and the retrieved human
/// messages.
pub fn sim_score<S: Scalar>(
    candidate_message: &str,
    retrieved: &[&CorpusEntry<S>],
    text_embedder: &dyn Embedder<S>,
) -> Result<S, RetrievalError> {
    if retrieved.is_empty() {
        return Err(RetrievalError::EmptyRetrieval);
    }
    let candidate = text_embedder.embed(candidate_message)?;
    let mut total = S::zero();
    for entry in retrieved {
        total = total + candidate.cosine(&entry.message_embedding)?;
    }
    let n = S::from_usize(retrieved.len()).expect("count fits");
    Ok((total / n).max(-S::one()).min(S::one()))
}
