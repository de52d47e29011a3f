use num_traits::Num;
use serde::{Deserialize, Serialize};

use super::{Metric, QualityError, MAX_METRIC};
use crate::scalar::Scalar;

/// Coefficients for one metric. With `use_sim` the metric mixes the
/// retrieval similarity and the scorer label; without it the label is used
/// as is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "S: Deserialize<'de>"))]
pub struct MetricWeights<S> {
    pub sim_coeff: S,
    pub llm_coeff: S,
    pub use_sim: bool,
}

impl<S: Scalar> MetricWeights<S> {
    pub fn equal(use_sim: bool) -> Self {
        MetricWeights {
            sim_coeff: S::lit(0.5),
            llm_coeff: S::lit(0.5),
            use_sim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "S: Scalar"))]
pub struct EvaluatorWeights<S> {
    pub rationality: MetricWeights<S>,
    pub comprehensiveness: MetricWeights<S>,
    pub conciseness: MetricWeights<S>,
    pub expressiveness: MetricWeights<S>,
}

impl<S: Scalar> Default for EvaluatorWeights<S> {
    fn default() -> Self {
        EvaluatorWeights {
            rationality: MetricWeights::equal(true),
            comprehensiveness: MetricWeights::equal(true),
            conciseness: MetricWeights::equal(false),
            expressiveness: MetricWeights::equal(true),
        }
    }
}

impl<S: Scalar> EvaluatorWeights<S> {
    pub fn get(&self, metric: Metric) -> &MetricWeights<S> {
        match metric {
            Metric::Rationality => &self.rationality,
            Metric::Comprehensiveness => &self.comprehensiveness,
            Metric::Conciseness => &self.conciseness,
            Metric::Expressiveness => &self.expressiveness,
        }
    }

    pub fn get_mut(&mut self, metric: Metric) -> &mut MetricWeights<S> {
        match metric {
            Metric::Rationality => &mut self.rationality,
            Metric::Comprehensiveness => &mut self.comprehensiveness,
            Metric::Conciseness => &mut self.conciseness,
            Metric::Expressiveness => &mut self.expressiveness,
        }
    }

    pub fn any_sim(&self) -> bool {
        Metric::ALL.iter().any(|m| self.get(*m).use_sim)
    }

    pub fn validate(&self) -> Result<(), QualityError> {
        for m in Metric::ALL {
            let w = self.get(m);
            if !(w.sim_coeff >= S::zero() && w.llm_coeff >= S::zero()) {
                return Err(QualityError::InvalidWeights {
                    metric: m,
                    reason: "coefficients must be non-negative".into(),
                });
            }
            if w.use_sim && w.sim_coeff + w.llm_coeff == S::zero() {
                return Err(QualityError::ZeroWeights { metric: m });
            }
        }
        Ok(())
    }
}

fn small<T: Num>(n: u8) -> T {
    (0..n).fold(T::zero(), |acc, _| acc + T::one())
}

/// Combines a similarity in [-1, 1] and a 0-4 label into one metric score in
/// [0, 4]. The similarity is clamped to [0, 1] and scaled by 4; the two terms
/// are weighted by each coefficient's share of their sum.
///
/// Generic over any ordered numeric field so it can run on exact rationals.
pub fn combined_metric_score<T>(metric: Metric, sim: T, llm: u8, w: &MetricWeights<T>) -> Result<T, QualityError>
where
    T: Num + PartialOrd + Clone,
{
    if llm > MAX_METRIC {
        return Err(QualityError::InvalidLabel { label: llm });
    }
    let llm_v: T = small(llm);
    if !w.use_sim {
        return Ok(llm_v);
    }
    let zero = T::zero();
    if w.sim_coeff < zero || w.llm_coeff < zero {
        return Err(QualityError::InvalidWeights {
            metric,
            reason: "coefficients must be non-negative".into(),
        });
    }
    let total = w.sim_coeff.clone() + w.llm_coeff.clone();
    if total == zero {
        return Err(QualityError::ZeroWeights { metric });
    }
    let sim = if sim < zero {
        zero
    } else if sim > T::one() {
        T::one()
    } else {
        sim
    };
    let four: T = small(MAX_METRIC);
    Ok(sim * four * w.sim_coeff.clone() / total.clone() + llm_v * w.llm_coeff.clone() / total)
}

/// Sample Pearson correlation; `None` when either side has no variance or
/// the inputs are empty or of unequal length.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Recomputes one metric's coefficients from a labeled validation set of
/// `(sim, scorer label, human label)` triples: each coefficient is the
/// Pearson correlation of its signal with the human label, floored at 0.
pub fn calibrate_metric_weights(
    metric: Metric,
    samples: &[(f64, u8, u8)],
    use_sim: bool,
) -> Result<MetricWeights<f64>, QualityError> {
    if samples.is_empty() {
        return Err(QualityError::EmptyDataset);
    }
    let sims: Vec<f64> = samples.iter().map(|s| s.0.clamp(0.0, 1.0)).collect();
    let llms: Vec<f64> = samples.iter().map(|s| s.1 as f64).collect();
    let humans: Vec<f64> = samples.iter().map(|s| s.2 as f64).collect();
    let w = MetricWeights {
        sim_coeff: pearson(&sims, &humans).unwrap_or(0.0).max(0.0),
        llm_coeff: pearson(&llms, &humans).unwrap_or(0.0).max(0.0),
        use_sim,
    };
    if use_sim && w.sim_coeff + w.llm_coeff == 0.0 {
        return Err(QualityError::ZeroWeights { metric });
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    const M: Metric = Metric::Rationality;

    fn w(sc: f64, lc: f64, use_sim: bool) -> MetricWeights<f64> {
        MetricWeights {
            sim_coeff: sc,
            llm_coeff: lc,
            use_sim,
        }
    }

    #[test]
    fn worked_example() {
        let got = combined_metric_score(M, 0.75, 3, &w(0.3, 0.6, true)).unwrap();
        assert!((got - 3.0).abs() < 1e-12);
    }

    #[test]
    fn worked_example_exact() {
        let r = |n, d| Ratio::<i64>::new(n, d);
        let wr = MetricWeights {
            sim_coeff: r(3, 10),
            llm_coeff: r(6, 10),
            use_sim: true,
        };
        assert_eq!(combined_metric_score(M, r(3, 4), 3, &wr).unwrap(), r(3, 1));
        let neg = combined_metric_score(M, r(-1, 2), 0, &wr).unwrap();
        assert_eq!(neg, r(0, 1));
    }

    #[test]
    fn upper_bound_and_sim_off() {
        assert_eq!(combined_metric_score(M, 1.0, 4, &w(0.2, 0.9, true)).unwrap(), 4.0);
        assert_eq!(
            combined_metric_score(Metric::Conciseness, 0.9, 2, &w(0.5, 0.5, false)).unwrap(),
            2.0
        );
        assert_eq!(
            combined_metric_score(Metric::Conciseness, -0.9, 2, &w(0.0, 0.0, false)).unwrap(),
            2.0
        );
    }

    #[test]
    fn zero_weights_rejected() {
        assert!(matches!(
            combined_metric_score(M, 0.5, 2, &w(0.0, 0.0, true)),
            Err(QualityError::ZeroWeights { .. })
        ));
        assert!(matches!(
            combined_metric_score(M, 0.5, 5, &w(0.5, 0.5, true)),
            Err(QualityError::InvalidLabel { label: 5 })
        ));
    }

    #[test]
    fn defaults() {
        let d = EvaluatorWeights::<f64>::default();
        assert!(!d.conciseness.use_sim);
        assert!(d.rationality.use_sim && d.expressiveness.use_sim && d.comprehensiveness.use_sim);
        assert_eq!(d.rationality.sim_coeff, 0.5);
        d.validate().unwrap();
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn calibration_floors_negative_correlation() {
        let samples = [(0.9, 0, 4), (0.5, 2, 2), (0.1, 4, 0)];
        let w = calibrate_metric_weights(M, &samples, true).unwrap();
        assert!((w.sim_coeff - 1.0).abs() < 1e-12);
        assert_eq!(w.llm_coeff, 0.0);
    }
}
