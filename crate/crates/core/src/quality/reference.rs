use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::QualityError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScores {
    pub bleu4: f64,
    pub rouge_l_f1: f64,
}

/// Lowercases and splits on whitespace; every punctuation character becomes
/// its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(c.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    for g in tokens.windows(n) {
        *out.entry(g).or_insert(0) += 1;
    }
    out
}

/// Sentence BLEU-4, uniform weights, no smoothing. Orders for which the
/// candidate has no n-grams at all are left out of the geometric mean so a
/// short exact match still scores 1.
pub fn bleu4(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=4 {
        if candidate.len() < n {
            break;
        }
        let cand = ngram_counts(candidate, n);
        let refc = ngram_counts(reference, n);
        let matched: usize = cand
            .iter()
            .map(|(g, c)| (*c).min(refc.get(g).copied().unwrap_or(0)))
            .sum();
        if matched == 0 {
            return 0.0;
        }
        let total = candidate.len() + 1 - n;
        log_sum += (matched as f64 / total as f64).ln();
        orders += 1;
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * (log_sum / orders as f64).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_f1(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(candidate, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    2.0 * p * r / (p + r)
}

pub fn reference_metrics(candidate: &str, reference: &str) -> Result<ReferenceScores, QualityError> {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() || r.is_empty() {
        return Err(QualityError::EmptyAfterTokenization);
    }
    Ok(ReferenceScores {
        bleu4: bleu4(&c, &r),
        rouge_l_f1: rouge_l_f1(&c, &r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(
            tokenize("Fix NPE, (again)!"),
            ["fix", "npe", ",", "(", "again", ")", "!"]
        );
    }

    #[test]
    fn identity_is_one() {
        for t in ["a", "fix it", "Fix NPE in handler because session may be null"] {
            let s = reference_metrics(t, t).unwrap();
            assert_eq!(s.bleu4, 1.0);
            assert_eq!(s.rouge_l_f1, 1.0);
        }
    }

    #[test]
    fn lcs_example() {
        let s = reference_metrics("a b c", "a c").unwrap();
        assert!((s.rouge_l_f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(
            reference_metrics("  ", "x"),
            Err(QualityError::EmptyAfterTokenization)
        ));
    }
}
