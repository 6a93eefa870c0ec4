//! Scalar abstraction for the geometric parts of the engine.

use num_traits::{Float, FromPrimitive};

/// Floating point type usable for canvas geometry and attention weights: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + std::fmt::Debug + Default + Send + Sync + 'static {
    /// Lossy conversion used by the sampler when drawing uniform variates.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
