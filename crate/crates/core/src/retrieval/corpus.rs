use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::what_why::{classify_what_why, WhatWhyClassifier};
use super::{Embedder, RetrievalError, UnitVector};
use crate::diff::Fingerprint;
use crate::llm::write_atomic;
use crate::scalar::Scalar;

pub const CORPUS_FORMAT: &str = "cmo-corpus";
pub const CORPUS_VERSION: u32 = 1;

/// First line of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusHeader {
    pub format: String,
    pub version: u32,
    pub diff_embedder: String,
    pub text_embedder: String,
    pub dim: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusMeta {
    #[serde(default)]
    pub repo: String,
    #[serde(default)]
    pub commit_id: Option<String>,
    #[serde(default)]
    pub timestamp: Option<String>,
}

/// One high-quality exemplar: a diff and the human message written for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct CorpusEntry<S: Scalar> {
    pub entry_id: String,
    pub diff_text: String,
    pub diff_fingerprint: Fingerprint,
    pub diff_embedding: UnitVector<S>,
    pub message_text: String,
    pub message_embedding: UnitVector<S>,
    pub meta: CorpusMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStore<S: Scalar> {
    pub header: CorpusHeader,
    pub entries: Vec<CorpusEntry<S>>,
}

/// One line of `build-corpus` input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusInput {
    #[serde(default)]
    pub id: Option<String>,
    pub diff: String,
    pub message: String,
    #[serde(default)]
    pub repo: String,
    #[serde(default)]
    pub commit_id: Option<String>,
    #[serde(default)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildReport {
    pub seen: usize,
    pub kept: usize,
    pub filtered: usize,
    pub classifier_fallbacks: usize,
    pub diagnostics: Vec<String>,
}

impl<S: Scalar> CorpusStore<S> {
    pub fn empty(diff_embedder: &dyn Embedder<S>, text_embedder: &dyn Embedder<S>) -> Result<Self, RetrievalError> {
        if diff_embedder.dim() != text_embedder.dim() {
            return Err(RetrievalError::DimMismatch {
                expected: diff_embedder.dim(),
                got: text_embedder.dim(),
            });
        }
        Ok(CorpusStore {
            header: CorpusHeader {
                format: CORPUS_FORMAT.into(),
                version: CORPUS_VERSION,
                diff_embedder: diff_embedder.id().into(),
                text_embedder: text_embedder.id().into(),
                dim: diff_embedder.dim(),
            },
            entries: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rejects embedders other than the ones the corpus was built with.
    pub fn check_embedders(
        &self,
        diff_embedder: Option<&dyn Embedder<S>>,
        text_embedder: Option<&dyn Embedder<S>>,
    ) -> Result<(), RetrievalError> {
        let pairs = [
            ("diff", &self.header.diff_embedder, diff_embedder),
            ("text", &self.header.text_embedder, text_embedder),
        ];
        for (slot, expected, given) in pairs {
            if let Some(e) = given {
                if e.id() != expected {
                    return Err(RetrievalError::EmbedderMismatch {
                        slot,
                        expected: expected.clone(),
                        got: e.id().to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// JSON-lines serialization: the header, then one entry per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        write_atomic(path, self.to_jsonl().as_bytes())
            .map_err(|e| RetrievalError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let file = fs::File::open(path).map_err(|e| RetrievalError::Io(format!("{}: {e}", path.display())))?;
        Self::read(BufReader::new(file), &path.display().to_string())
    }

    pub fn read(reader: impl BufRead, origin: &str) -> Result<Self, RetrievalError> {
        let bad = |line: usize, reason: String| RetrievalError::CorpusFormat {
            origin: origin.to_string(),
            line,
            reason,
        };
        let mut lines = reader.lines().enumerate();
        let header_line = match lines.next() {
            Some((_, Ok(l))) => l,
            Some((_, Err(e))) => return Err(RetrievalError::Io(e.to_string())),
            None => return Err(bad(1, "missing header".into())),
        };
        let header: CorpusHeader = serde_json::from_str(&header_line).map_err(|e| bad(1, e.to_string()))?;
        if header.format != CORPUS_FORMAT || header.version != CORPUS_VERSION {
            return Err(bad(
                1,
                format!("unsupported corpus format {} v{}", header.format, header.version),
            ));
        }

        let mut entries = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| RetrievalError::Io(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let entry: CorpusEntry<S> = serde_json::from_str(&line).map_err(|e| bad(idx + 1, e.to_string()))?;
            for v in [&entry.diff_embedding, &entry.message_embedding] {
                if v.dim() != header.dim {
                    return Err(bad(
                        idx + 1,
                        format!("embedding dim {} != corpus dim {}", v.dim(), header.dim),
                    ));
                }
            }
            if Fingerprint::of_text(&entry.diff_text) != entry.diff_fingerprint {
                return Err(RetrievalError::FingerprintMismatch {
                    entry_id: entry.entry_id,
                });
            }
            entries.push(entry);
        }
        Ok(CorpusStore { header, entries })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Worker threads for embedding; 1 embeds sequentially.
    pub jobs: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { jobs: 1 }
    }
}

/// Filters `commits` to messages carrying both "what" and "why", embeds the
/// survivors and writes the corpus to `out_path`.
pub fn build_corpus<S: Scalar>(
    commits: impl IntoIterator<Item = CorpusInput>,
    diff_embedder: &dyn Embedder<S>,
    text_embedder: &dyn Embedder<S>,
    classifier: &dyn WhatWhyClassifier,
    out_path: &Path,
    options: BuildOptions,
) -> Result<(CorpusStore<S>, BuildReport), RetrievalError> {
    let mut store = CorpusStore::empty(diff_embedder, text_embedder)?;
    let mut report = BuildReport::default();

    let mut kept: Vec<(usize, CorpusInput)> = Vec::new();
    for (idx, input) in commits.into_iter().enumerate() {
        report.seen += 1;
        let verdict = classify_what_why(&input.message, classifier);
        if verdict.fell_back {
            report.classifier_fallbacks += 1;
        }
        if verdict.labels.both() {
            kept.push((idx, input));
        } else {
            report.filtered += 1;
        }
    }

    let embed_one = |(idx, input): &(usize, CorpusInput)| -> Result<CorpusEntry<S>, String> {
        let entry_id = input.id.clone().unwrap_or_else(|| format!("e{idx:06}"));
        let diff_embedding = diff_embedder
            .embed(&input.diff)
            .map_err(|e| format!("{entry_id}: diff embedding failed: {e}"))?;
        let message_embedding = text_embedder
            .embed(&input.message)
            .map_err(|e| format!("{entry_id}: message embedding failed: {e}"))?;
        Ok(CorpusEntry {
            entry_id,
            diff_fingerprint: Fingerprint::of_text(&input.diff),
            diff_text: input.diff.clone(),
            diff_embedding,
            message_text: input.message.clone(),
            message_embedding,
            meta: CorpusMeta {
                repo: input.repo.clone(),
                commit_id: input.commit_id.clone(),
                timestamp: input.timestamp.clone(),
            },
        })
    };

    let results: Vec<Result<CorpusEntry<S>, String>> = if options.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| RetrievalError::Io(e.to_string()))?;
        pool.install(|| kept.par_iter().map(embed_one).collect())
    } else {
        kept.iter().map(embed_one).collect()
    };

    for r in results {
        match r {
            Ok(entry) => store.entries.push(entry),
            Err(diag) => {
                log::warn!("{diag}");
                report.diagnostics.push(diag);
            }
        }
    }
    report.kept = store.entries.len();
    store.save(out_path)?;
    Ok((store, report))
}

/// Reads `build-corpus` input: one [`CorpusInput`] JSON object per line.
pub fn read_corpus_inputs(reader: impl BufRead) -> Result<Vec<CorpusInput>, RetrievalError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| RetrievalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| RetrievalError::CorpusFormat {
            origin: "input".into(),
            line: idx + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Writes inputs back out as JSON lines (used by fixtures and tooling).
pub fn write_corpus_inputs(mut w: impl Write, inputs: &[CorpusInput]) -> std::io::Result<()> {
    for i in inputs {
        writeln!(w, "{}", serde_json::to_string(i).expect("input serializes"))?;
    }
    Ok(())
}
