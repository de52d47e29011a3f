use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::scorer::llm_metric_scores;
use super::{combined_metric_score, EvaluatorWeights, Metric, MetricScorer, QualityError, QualityVector};
use crate::diff::{diff_fingerprint, CommitDiff, Fingerprint};
use crate::retrieval::{query_similar, sim_score, CorpusStore, Embedder, Exemplar, RetrievalConfig, RetrievalError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<S> {
    pub quality: QualityVector<S>,
    /// Sum of `quality`, in [0, 16].
    pub score: S,
    /// Raw scorer labels in metric order.
    pub labels: [u8; 4],
    /// Mean similarity to the retrieved messages, when any metric uses it.
    pub sim: Option<S>,
    pub diff_truncated: bool,
}

/// The optimizer's view of the objective function.
pub trait Evaluate<S: Scalar>: Send + Sync {
    fn evaluate(&self, diff: &CommitDiff, message: &str) -> Result<Evaluation<S>, QualityError>;
}

/// Retrieval similarity plus per-metric scorer labels, combined per metric
/// and summed. Retrieval is memoized per diff and evaluation per
/// (diff, message).
pub struct Evaluator<S: Scalar> {
    store: Option<Arc<CorpusStore<S>>>,
    retrieval: RetrievalConfig,
    diff_embedder: Arc<dyn Embedder<S>>,
    text_embedder: Arc<dyn Embedder<S>>,
    scorer: Arc<dyn MetricScorer>,
    weights: EvaluatorWeights<S>,
    retrieved: RwLock<HashMap<Fingerprint, Arc<Vec<usize>>>>,
    memo: RwLock<HashMap<(Fingerprint, Fingerprint), Evaluation<S>>>,
}

impl<S: Scalar> Evaluator<S> {
    pub fn new(
        store: Option<Arc<CorpusStore<S>>>,
        retrieval: RetrievalConfig,
        diff_embedder: Arc<dyn Embedder<S>>,
        text_embedder: Arc<dyn Embedder<S>>,
        scorer: Arc<dyn MetricScorer>,
        weights: EvaluatorWeights<S>,
    ) -> Result<Self, QualityError> {
        weights.validate()?;
        if let Some(store) = &store {
            store.check_embedders(Some(diff_embedder.as_ref()), Some(text_embedder.as_ref()))?;
        }
        Ok(Evaluator {
            store,
            retrieval,
            diff_embedder,
            text_embedder,
            scorer,
            weights,
            retrieved: RwLock::new(HashMap::new()),
            memo: RwLock::new(HashMap::new()),
        })
    }

    pub fn weights(&self) -> &EvaluatorWeights<S> {
        &self.weights
    }

    fn store(&self) -> Result<&CorpusStore<S>, RetrievalError> {
        match &self.store {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(RetrievalError::EmptyCorpus),
        }
    }

    fn retrieved_indices(&self, diff: &CommitDiff) -> Result<Arc<Vec<usize>>, QualityError> {
        let fp = diff_fingerprint(diff);
        if let Some(hit) = self.retrieved.read().expect("memo lock").get(&fp) {
            return Ok(hit.clone());
        }
        let store = self.store()?;
        let found = query_similar(diff, store, self.diff_embedder.as_ref(), &self.retrieval)?;
        let idx = Arc::new(found.iter().map(|r| r.index).collect::<Vec<_>>());
        self.retrieved.write().expect("memo lock").insert(fp, idx.clone());
        Ok(idx)
    }

    /// The top-k corpus pairs for `diff`, most similar first.
    pub fn exemplars(&self, diff: &CommitDiff) -> Result<Vec<Exemplar>, QualityError> {
        let idx = self.retrieved_indices(diff)?;
        let store = self.store()?;
        Ok(idx
            .iter()
            .map(|&i| {
                let e = &store.entries[i];
                Exemplar {
                    entry_id: e.entry_id.clone(),
                    diff_text: e.diff_text.clone(),
                    message_text: e.message_text.clone(),
                }
            })
            .collect())
    }

    fn compute(&self, diff: &CommitDiff, message: &str) -> Result<Evaluation<S>, QualityError> {
        let sim = if self.weights.any_sim() {
            let idx = self.retrieved_indices(diff)?;
            let store = self.store()?;
            let entries: Vec<_> = idx.iter().map(|&i| &store.entries[i]).collect();
            Some(sim_score(message, &entries, self.text_embedder.as_ref())?)
        } else {
            None
        };
        let labels = llm_metric_scores(&diff.raw_text, message, self.scorer.as_ref())?;
        let mut values = [S::zero(); 4];
        for m in Metric::ALL {
            values[m.index()] =
                combined_metric_score(m, sim.unwrap_or_else(S::zero), labels[m.index()], self.weights.get(m))?;
        }
        let quality = QualityVector::from_array(values)?;
        Ok(Evaluation {
            score: quality.optimization_score(),
            quality,
            labels,
            sim,
            diff_truncated: self.scorer.truncates(&diff.raw_text),
        })
    }
}

impl<S: Scalar> Evaluate<S> for Evaluator<S> {
    fn evaluate(&self, diff: &CommitDiff, message: &str) -> Result<Evaluation<S>, QualityError> {
        let key = (diff_fingerprint(diff), Fingerprint::of_text(message));
        if let Some(hit) = self.memo.read().expect("memo lock").get(&key) {
            return Ok(hit.clone());
        }
        let out = self.compute(diff, message)?;
        if out.diff_truncated {
            log::info!("diff truncated to the scorer token budget");
        }
        self.memo.write().expect("memo lock").insert(key, out.clone());
        Ok(out)
    }
}
