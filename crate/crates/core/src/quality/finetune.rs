use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scorer::{metric_rubric, scorer_user_prompt};
use super::{Metric, QualityError, MAX_METRIC};
use crate::llm::{write_atomic, ChatMessage};

/// A human-labeled (diff, message) pair; `scores` are 0-4 labels in
/// [`Metric::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub diff_text: String,
    pub message_text: String,
    pub scores: [u8; 4],
}

impl LabeledExample {
    pub fn label(&self, metric: Metric) -> u8 {
        self.scores[metric.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneDataset {
    pub metric: Metric,
    pub examples: Vec<LabeledExample>,
}

#[derive(Serialize)]
struct ChatRecord {
    messages: Vec<ChatMessage>,
}

impl FinetuneDataset {
    pub fn class_counts(&self) -> BTreeMap<u8, usize> {
        let mut out = BTreeMap::new();
        for e in &self.examples {
            *out.entry(e.label(self.metric)).or_insert(0) += 1;
        }
        out
    }

    /// One chat record per line: rubric, then diff and message, then the label.
    pub fn to_jsonl(&self) -> String {
        let rubric = metric_rubric(self.metric);
        let mut out = String::new();
        for e in &self.examples {
            let rec = ChatRecord {
                messages: vec![
                    ChatMessage::system(rubric.clone()),
                    ChatMessage::user(scorer_user_prompt(&e.diff_text, &e.message_text)),
                    ChatMessage::assistant(e.label(self.metric).to_string()),
                ],
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), QualityError> {
        write_atomic(path, self.to_jsonl().as_bytes()).map_err(|e| QualityError::Io(format!("{}: {e}", path.display())))
    }
}

/// Random oversampling: every label class present for `metric` is topped up
/// with draws (with replacement) from its own members until it matches the
/// largest class; the result is shuffled. Fully determined by `seed`.
pub fn prepare_finetune_dataset(
    examples: &[LabeledExample],
    metric: Metric,
    seed: u64,
) -> Result<FinetuneDataset, QualityError> {
    if examples.is_empty() {
        return Err(QualityError::EmptyDataset);
    }
    let mut classes: BTreeMap<u8, Vec<&LabeledExample>> = BTreeMap::new();
    for e in examples {
        if let Some(&bad) = e.scores.iter().find(|s| **s > MAX_METRIC) {
            return Err(QualityError::InvalidLabel { label: bad });
        }
        classes.entry(e.label(metric)).or_default().push(e);
    }
    let target = classes.values().map(Vec::len).max().unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(target * classes.len());
    for members in classes.values() {
        out.extend(members.iter().map(|e| (*e).clone()));
        for _ in members.len()..target {
            let pick = members[rng.gen_range(0..members.len())];
            out.push(pick.clone());
        }
    }
    out.shuffle(&mut rng);
    Ok(FinetuneDataset { metric, examples: out })
}
