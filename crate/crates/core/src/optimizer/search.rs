use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prompt::{bundle_contexts, ContextBundle, MessageUpdater, UpdateRequest};
use super::{MessageCandidate, OptimizationResult, OptimizerConfig, OptimizerError, StopReason};
use crate::context::{CommitType, ContextItem, ContextKind};
use crate::diff::CommitDiff;
use crate::quality::{Evaluate, Evaluation, QualityVector};
use crate::retrieval::Exemplar;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceEventKind {
    Enqueue,
    Dequeue,
    Update,
    Best,
    Stop,
}

/// One JSON-lines trace record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub event: TraceEventKind,
    pub step: usize,
    pub candidate_id: Option<String>,
    pub parent_id: Option<String>,
    pub kind: Option<ContextKind>,
    pub score: Option<f64>,
    pub threshold: f64,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<StopReason>,
}

/// What the search needs besides the inputs.
pub struct OptimizeDeps<'a, S: Scalar> {
    pub evaluator: &'a dyn Evaluate<S>,
    pub updater: &'a dyn MessageUpdater<S>,
    pub exemplars: &'a [Exemplar],
    pub commit_type: Option<&'a CommitType>,
}

/// An UPDATE result before evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChildMessage {
    pub text: String,
    pub considered: Vec<ContextKind>,
    pub parent_id: String,
    pub context: ContextKind,
}

/// Rewrites `cur` with one new context kind.
#[allow(clippy::too_many_arguments)]
pub fn update_candidate<S: Scalar>(
    cur: &MessageCandidate<S>,
    diff: &CommitDiff,
    context: &ContextBundle,
    feedback: &QualityVector<S>,
    updater: &dyn MessageUpdater<S>,
    temperature: f64,
    exemplars: &[Exemplar],
    commit_type: Option<&CommitType>,
    format_template: &str,
) -> Result<ChildMessage, OptimizerError> {
    if !context.kind.is_injectable() {
        return Err(OptimizerError::NotInjectable(context.kind));
    }
    if cur.has_considered(context.kind) {
        return Err(OptimizerError::AlreadyConsidered(context.kind));
    }
    let req = UpdateRequest {
        diff,
        current_message: &cur.text,
        feedback,
        considered: &cur.considered,
        context,
        commit_type,
        exemplars,
        format_template,
        temperature,
    };
    let text = updater.update(&req).map_err(|source| OptimizerError::Update {
        kind: context.kind,
        source,
    })?;
    let mut considered = cur.considered.clone();
    considered.push(context.kind);
    Ok(ChildMessage {
        text,
        considered,
        parent_id: cur.id.clone(),
        context: context.kind,
    })
}

struct Queued<S> {
    cand: MessageCandidate<S>,
    seq: usize,
}

struct Run<S: Scalar> {
    trace: Vec<TraceEvent>,
    threshold: S,
    temperature: f64,
    step: usize,
}

impl<S: Scalar> Run<S> {
    fn event(&mut self, event: TraceEventKind, c: Option<&MessageCandidate<S>>) {
        self.trace.push(TraceEvent {
            event,
            step: self.step,
            candidate_id: c.map(|c| c.id.clone()),
            parent_id: c.and_then(|c| c.parent_id.clone()),
            kind: c.and_then(|c| c.context),
            score: c.map(|c| c.score.to_f64_lossy()),
            threshold: self.threshold.to_f64_lossy(),
            temperature: self.temperature,
            reason: None,
        });
    }

    /// Kinds `c` can still be expanded with.
    fn remaining(&self, c: &MessageCandidate<S>, bundles: &[ContextBundle]) -> Vec<usize> {
        bundles
            .iter()
            .enumerate()
            .filter(|(_, b)| !c.has_considered(b.kind))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Best-first search from `initial_message`. Only a failure to evaluate
/// the initial message aborts; failed children are skipped and reported in
/// the result diagnostics. The result is never worse than the initial
/// message.
pub fn optimize<S: Scalar>(
    diff: &CommitDiff,
    initial_message: &str,
    contexts: &[ContextItem],
    cfg: &OptimizerConfig<S>,
    deps: &OptimizeDeps<'_, S>,
) -> Result<OptimizationResult<S>, OptimizerError> {
    cfg.validate()?;
    if initial_message.trim().is_empty() {
        return Err(OptimizerError::EmptyMessage);
    }
    let bundles = bundle_contexts(contexts, &cfg.kinds, cfg.bundle_budget);
    let initial = deps
        .evaluator
        .evaluate(diff, initial_message)
        .map_err(OptimizerError::InitialEvaluation)?;

    let n = S::from_usize(cfg.step_limit).expect("step limit fits");
    let mut highest = initial.score;
    let threshold0 = highest * cfg.p;
    let min_threshold = threshold0 / n;
    let mut run = Run {
        trace: Vec::new(),
        threshold: threshold0,
        temperature: cfg.base_temperature,
        step: 0,
    };
    // running bests in update order, starting with the initial score
    let mut history = vec![highest];
    let mut updates: Vec<MessageCandidate<S>> = Vec::new();
    let mut diagnostics = Vec::new();

    let terminal = |considered: &[ContextKind]| cfg.kinds.iter().all(|k| considered.contains(k));
    let root = MessageCandidate {
        id: "c0".to_string(),
        text: initial_message.to_string(),
        considered: Vec::new(),
        quality: initial.quality,
        score: initial.score,
        parent_id: None,
        step_created: 0,
        context: None,
        terminal: terminal(&[]),
    };
    run.event(TraceEventKind::Enqueue, Some(&root));
    let mut queue = vec![Queued { cand: root, seq: 0 }];
    let mut next_id = 1usize;
    let mut stop = StopReason::StepLimit;

    while run.step < cfg.step_limit {
        run.step += 1;
        let remaining_steps = S::from_usize(cfg.step_limit - run.step).expect("fits");
        run.threshold = run.threshold * remaining_steps / n;
        if run.threshold < min_threshold {
            run.threshold = min_threshold;
        }

        let Some(pos) = queue
            .iter()
            .position(|q| !q.cand.terminal && !run.remaining(&q.cand, &bundles).is_empty())
        else {
            stop = StopReason::QueueExhausted;
            break;
        };
        let cur = queue.remove(pos).cand;
        run.event(TraceEventKind::Dequeue, Some(&cur));

        let todo = run.remaining(&cur, &bundles);
        let temperature = run.temperature;
        let expand = |&b: &usize| -> Result<(ChildMessage, Evaluation<S>), OptimizerError> {
            let child = update_candidate(
                &cur,
                diff,
                &bundles[b],
                &cur.quality,
                deps.updater,
                temperature,
                deps.exemplars,
                deps.commit_type,
                &cfg.format_template,
            )?;
            let eval = deps
                .evaluator
                .evaluate(diff, &child.text)
                .map_err(|source| OptimizerError::Evaluation {
                    kind: bundles[b].kind,
                    source,
                })?;
            Ok((child, eval))
        };
        let results: Vec<_> = if cfg.parallel {
            todo.par_iter().map(expand).collect()
        } else {
            todo.iter().map(expand).collect()
        };
        for res in results {
            match res {
                Ok((child, eval)) => {
                    let cand = MessageCandidate {
                        id: format!("c{next_id}"),
                        terminal: terminal(&child.considered),
                        text: child.text,
                        considered: child.considered,
                        quality: eval.quality,
                        score: eval.score,
                        parent_id: Some(child.parent_id),
                        step_created: run.step,
                        context: Some(child.context),
                    };
                    run.event(TraceEventKind::Enqueue, Some(&cand));
                    queue.push(Queued { cand, seq: next_id });
                    next_id += 1;
                }
                Err(e) => {
                    log::warn!("step {}: child skipped: {e}", run.step);
                    diagnostics.push(format!("step {}: {e}", run.step));
                }
            }
        }
        queue.sort_by(|a, b| {
            b.cand
                .score
                .partial_cmp(&a.cand.score)
                .unwrap_or(Ordering::Equal)
                .then(a.seq.cmp(&b.seq))
        });

        let Some(head) = queue.first().map(|q| q.cand.clone()) else {
            continue;
        };
        if head.score > highest {
            highest = head.score;
            history.push(highest);
            run.event(TraceEventKind::Update, Some(&head));
            updates.push(head);
            let k = history.len() - 1;
            if k >= 2 && history[k] - history[k - 2] < run.threshold {
                stop = StopReason::Converged;
                break;
            }
            run.temperature = if history[k] - history[k - 1] < run.threshold {
                cfg.escalation_temperature
            } else {
                cfg.base_temperature
            };
        }
    }

    let (message, quality, score) = match updates.last() {
        Some(best) => {
            run.event(TraceEventKind::Best, Some(best));
            (best.text.clone(), best.quality, best.score)
        }
        None => (initial_message.to_string(), initial.quality, initial.score),
    };
    run.trace.push(TraceEvent {
        event: TraceEventKind::Stop,
        step: run.step,
        candidate_id: Some(updates.last().map_or("c0".to_string(), |b| b.id.clone())),
        parent_id: None,
        kind: None,
        score: Some(score.to_f64_lossy()),
        threshold: run.threshold.to_f64_lossy(),
        temperature: run.temperature,
        reason: Some(stop),
    });
    Ok(OptimizationResult {
        message,
        quality,
        score,
        initial_score: initial.score,
        steps_used: run.step,
        stop_reason: stop,
        updates,
        trace: run.trace,
        diagnostics,
    })
}
