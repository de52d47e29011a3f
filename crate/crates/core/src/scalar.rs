//! Numeric scalar abstraction shared by the scoring and retrieval code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A floating point scalar usable for embeddings, metric scores and the
/// optimizer's thresholds. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot hold a finite
    /// value, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}
