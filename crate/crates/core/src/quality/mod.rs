//! The objective function: per-metric scores, their combination with the
//! retrieval similarity, and offline tooling around the scorers.

mod evaluate;
mod finetune;
mod reference;
mod scorer;
mod weights;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::LlmError;
use crate::retrieval::RetrievalError;
use crate::scalar::Scalar;

pub use evaluate::{Evaluate, Evaluation, Evaluator};
pub use finetune::{prepare_finetune_dataset, FinetuneDataset, LabeledExample};
pub use reference::{bleu4, reference_metrics, rouge_l_f1, tokenize, ReferenceScores};
pub use scorer::{
    llm_metric_scores, parse_score, truncate_head, LlmMetricScorer, MetricScorer, DEFAULT_DIFF_TOKEN_BUDGET,
};
pub use weights::{calibrate_metric_weights, combined_metric_score, pearson, EvaluatorWeights, MetricWeights};

/// Highest value on the 0-4 Likert scale used by every metric.
pub const MAX_METRIC: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rationality,
    Comprehensiveness,
    Conciseness,
    Expressiveness,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Rationality,
        Metric::Comprehensiveness,
        Metric::Conciseness,
        Metric::Expressiveness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rationality => "rationality",
            Metric::Comprehensiveness => "comprehensiveness",
            Metric::Conciseness => "conciseness",
            Metric::Expressiveness => "expressiveness",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// What the metric rewards, as shown to scorer and updater models.
    pub fn definition(self) -> &'static str {
        match self {
            Metric::Rationality => {
                "Rationality: the message explains why the change was made, giving a logical reason \
                 such as the bug fixed, the problem avoided or the requirement met."
            }
            Metric::Comprehensiveness => {
                "Comprehensiveness: the message summarizes what was changed, covering all of the \
                 important modifications in the diff."
            }
            Metric::Conciseness => {
                "Conciseness: the message carries the essential information without redundancy \
                 or irrelevant detail."
            }
            Metric::Expressiveness => "Expressiveness: the message is grammatical, fluent and easy to read.",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

/// Scoring scale shared by the rubric prompts.
pub const SCORING_CRITERIA: &str = "Each metric is scored on an integer scale from 0 to 4: \
0 = very poor, 1 = poor, 2 = acceptable, 3 = good, 4 = excellent.";

/// The four combined metric scores of one message, each in [0, 4].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct QualityVector<S> {
    pub rationality: S,
    pub comprehensiveness: S,
    pub conciseness: S,
    pub expressiveness: S,
}

impl<S: Scalar> QualityVector<S> {
    pub fn from_array(values: [S; 4]) -> Result<Self, QualityError> {
        for (m, v) in Metric::ALL.iter().zip(values) {
            if !(v >= S::zero() && v <= S::lit(MAX_METRIC as f64)) {
                return Err(QualityError::OutOfRange {
                    metric: *m,
                    value: v.to_f64_lossy(),
                });
            }
        }
        let [rationality, comprehensiveness, conciseness, expressiveness] = values;
        Ok(QualityVector {
            rationality,
            comprehensiveness,
            conciseness,
            expressiveness,
        })
    }

    pub fn to_array(&self) -> [S; 4] {
        [
            self.rationality,
            self.comprehensiveness,
            self.conciseness,
            self.expressiveness,
        ]
    }

    pub fn get(&self, metric: Metric) -> S {
        self.to_array()[metric.index()]
    }

    /// Sum of the four metrics, in [0, 16].
    pub fn optimization_score(&self) -> S {
        self.to_array().into_iter().fold(S::zero(), |a, b| a + b)
    }

    /// `{rationality, comprehensiveness, conciseness, expressiveness, total}`.
    pub fn to_json_with_total(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("quality vector serializes");
        v["total"] = serde_json::to_value(self.optimization_score()).expect("scalar serializes");
        v
    }
}

impl<S: Scalar> fmt::Display for QualityVector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rationality={} comprehensiveness={} conciseness={} expressiveness={} total={}",
            self.rationality,
            self.comprehensiveness,
            self.conciseness,
            self.expressiveness,
            self.optimization_score()
        )
    }
}

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("unparseable {metric} score from backend: {response:?}")]
    UnparseableScore { metric: Metric, response: String },
    #[error("{metric}: both coefficients are zero while the similarity term is enabled")]
    ZeroWeights { metric: Metric },
    #[error("{metric}: invalid weights: {reason}")]
    InvalidWeights { metric: Metric, reason: String },
    #[error("{metric} score {value} outside [0, 4]")]
    OutOfRange { metric: Metric, value: f64 },
    #[error("label {label} outside 0..=4")]
    InvalidLabel { label: u8 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("text is empty after tokenization")]
    EmptyAfterTokenization,
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Backend(#[from] LlmError),
}
