use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::scalar::Scalar;

/// Tolerance on `| ||v|| - 1 |` for stored vectors.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// An L2-normalized embedding. Cosine similarity between two unit vectors is
/// their dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound(deserialize = "S: Scalar"))]
pub struct UnitVector<S: Scalar>(#[serde(deserialize_with = "deserialize_unit")] Vec<S>);

fn deserialize_unit<'de, D, S>(d: D) -> Result<Vec<S>, D::Error>
where
    D: serde::Deserializer<'de>,
    S: Scalar,
{
    let raw = Vec::<S>::deserialize(d)?;
    check_unit(&raw).map_err(serde::de::Error::custom)?;
    Ok(raw)
}

fn norm_f64<S: Scalar>(v: &[S]) -> f64 {
    v.iter()
        .map(|x| {
            let x = x.to_f64_lossy();
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

fn check_unit<S: Scalar>(v: &[S]) -> Result<(), RetrievalError> {
    if v.is_empty() {
        return Err(RetrievalError::ZeroVector);
    }
    let norm = norm_f64(v);
    if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(RetrievalError::NotUnitNorm { norm });
    }
    Ok(())
}

impl<S: Scalar> UnitVector<S> {
    /// Scales `raw` to unit length. Normalization runs in `f64` so `f32`
    /// vectors land well inside [`NORM_TOLERANCE`].
    pub fn normalize(raw: &[S]) -> Result<Self, RetrievalError> {
        let norm = norm_f64(raw);
        if !norm.is_finite() {
            return Err(RetrievalError::NotUnitNorm { norm });
        }
        if raw.is_empty() || norm == 0.0 {
            return Err(RetrievalError::ZeroVector);
        }
        Ok(UnitVector(
            raw.iter().map(|x| S::lit(x.to_f64_lossy() / norm)).collect(),
        ))
    }

    /// Wraps components that are already unit length.
    pub fn from_unit(components: Vec<S>) -> Result<Self, RetrievalError> {
        check_unit(&components)?;
        Ok(UnitVector(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[S] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm_f64(&self.0)
    }

    /// Cosine similarity, clamped to `[-1, 1]`.
    pub fn cosine(&self, other: &Self) -> Result<S, RetrievalError> {
        if self.dim() != other.dim() {
            return Err(RetrievalError::DimMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let dot = self.0.iter().zip(&other.0).fold(S::zero(), |acc, (a, b)| acc + *a * *b);
        Ok(dot.max(-S::one()).min(S::one()))
    }
}
