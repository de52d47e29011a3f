use std::sync::{Arc, LazyLock};

use regex::Regex;

use super::{Metric, QualityError, MAX_METRIC, SCORING_CRITERIA};
use crate::llm::{ChatMessage, ChatRequest, LlmClient};

/// Approximate diff budget (whitespace tokens) sent to scorer models.
pub const DEFAULT_DIFF_TOKEN_BUDGET: usize = 6000;

/// Produces a 0-4 label for one metric of one (diff, message) pair.
pub trait MetricScorer: Send + Sync {
    fn score(&self, diff: &str, message: &str, metric: Metric) -> Result<u8, QualityError>;

    /// Whether `diff` would be cut before reaching the backend.
    fn truncates(&self, _diff: &str) -> bool {
        false
    }
}

/// Scores all four metrics, in [`Metric::ALL`] order. Any failure aborts.
pub fn llm_metric_scores(diff: &str, message: &str, scorer: &dyn MetricScorer) -> Result<[u8; 4], QualityError> {
    let mut out = [0u8; 4];
    for m in Metric::ALL {
        out[m.index()] = scorer.score(diff, message, m)?;
    }
    Ok(out)
}

static LONE_INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[^\d-]*?(-?\d+)[^\d]*$").unwrap());

/// Reads a Likert label from a model response: a single integer, optionally
/// wrapped in a few words or punctuation (`"3"`, `"Score: 3."`).
pub fn parse_score(metric: Metric, response: &str) -> Result<u8, QualityError> {
    let bad = || QualityError::UnparseableScore {
        metric,
        response: response.to_string(),
    };
    let caps = LONE_INTEGER.captures(response.trim()).ok_or_else(bad)?;
    let n: i64 = caps[1].parse().map_err(|_| bad())?;
    if (0..=MAX_METRIC as i64).contains(&n) {
        Ok(n as u8)
    } else {
        Err(bad())
    }
}

/// Keeps the head of `text` up to `budget` whitespace-separated tokens,
/// cutting at a line boundary. Returns whether anything was dropped.
pub fn truncate_head(text: &str, budget: usize) -> (&str, bool) {
    let mut used = 0usize;
    let mut end = 0usize;
    for line in text.split_inclusive('\n') {
        let n = line.split_whitespace().count();
        if used + n > budget {
            return (&text[..end], true);
        }
        used += n;
        end += line.len();
    }
    (text, false)
}

/// One chat model per metric, typically fine-tuned classifiers.
pub struct LlmMetricScorer {
    client: Arc<LlmClient>,
    models: [String; 4],
    diff_token_budget: usize,
}

impl LlmMetricScorer {
    pub fn new(client: Arc<LlmClient>, models: [String; 4]) -> Self {
        LlmMetricScorer {
            client,
            models,
            diff_token_budget: DEFAULT_DIFF_TOKEN_BUDGET,
        }
    }

    pub fn uniform(client: Arc<LlmClient>, model: &str) -> Self {
        Self::new(client, std::array::from_fn(|_| model.to_string()))
    }

    pub fn with_diff_token_budget(mut self, budget: usize) -> Self {
        self.diff_token_budget = budget;
        self
    }

    pub fn request(&self, diff: &str, message: &str, metric: Metric) -> ChatRequest {
        let (diff, _) = truncate_head(diff, self.diff_token_budget);
        ChatRequest::new(
            self.models[metric.index()].clone(),
            vec![
                ChatMessage::system(metric_rubric(metric)),
                ChatMessage::user(scorer_user_prompt(diff, message)),
            ],
        )
        .with_max_tokens(8)
    }
}

pub(crate) fn metric_rubric(metric: Metric) -> String {
    format!(
        "You rate commit messages on a single metric.\n{}\n{SCORING_CRITERIA}\n\
         Reply with the integer score only.",
        metric.definition()
    )
}

pub(crate) fn scorer_user_prompt(diff: &str, message: &str) -> String {
    format!("Git diff:\n{diff}\n\nCommit message:\n{message}")
}

impl MetricScorer for LlmMetricScorer {
    fn score(&self, diff: &str, message: &str, metric: Metric) -> Result<u8, QualityError> {
        let resp = self.client.chat(&self.request(diff, message, metric))?;
        parse_score(metric, &resp.content)
    }

    fn truncates(&self, diff: &str) -> bool {
        truncate_head(diff, self.diff_token_budget).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockBackend, RetryPolicy};

    #[test]
    fn parses_labels() {
        let m = Metric::Rationality;
        assert_eq!(parse_score(m, "3").unwrap(), 3);
        assert_eq!(parse_score(m, " Score: 0.\n").unwrap(), 0);
        for bad in ["5", "-1", "", "three", "3 or 4", "2.5"] {
            assert!(
                matches!(parse_score(m, bad), Err(QualityError::UnparseableScore { .. })),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn truncation_is_head_first() {
        let text = "a b\nc d\ne f\n";
        assert_eq!(truncate_head(text, 4), ("a b\nc d\n", true));
        assert_eq!(truncate_head(text, 6), (text, false));
        assert_eq!(truncate_head(text, 5), ("a b\nc d\n", true));
    }

    fn scorer(mock: Arc<MockBackend>) -> LlmMetricScorer {
        let client = Arc::new(LlmClient::new(mock).with_retry(RetryPolicy::no_delay(1)));
        LlmMetricScorer::new(client, ["r".into(), "c".into(), "n".into(), "e".into()])
    }

    #[test]
    fn scripted_passthrough() {
        let mock = Arc::new(MockBackend::responder(|req| {
            Some(
                match req.model_id.as_str() {
                    "r" | "c" => "3",
                    _ => "4",
                }
                .to_string(),
            )
        }));
        let s = scorer(mock);
        assert_eq!(llm_metric_scores("d", "m", &s).unwrap(), [3, 3, 4, 4]);
    }

    #[test]
    fn out_of_range_rejected() {
        let mock = Arc::new(MockBackend::sequence(["5", "1", "1", "1"]));
        let s = scorer(mock);
        assert!(matches!(
            llm_metric_scores("d", "m", &s),
            Err(QualityError::UnparseableScore {
                metric: Metric::Rationality,
                ..
            })
        ));
    }

    #[test]
    fn cache_means_one_call_per_metric() {
        let mock = Arc::new(MockBackend::responder(|_| Some("2".into())));
        let s = scorer(mock.clone());
        llm_metric_scores("d", "m", &s).unwrap();
        llm_metric_scores("d", "m", &s).unwrap();
        assert_eq!(mock.calls(), 4);
    }
}
