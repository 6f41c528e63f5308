//! Scalar abstraction for the numeric layers.
//!
//! The map, prediction and gain math is written against [`Scalar`] so it can
//! run on `f32` or `f64`. The planner, simulator and benchmark layers use the
//! concrete [`crate::Real`] alias.

use num_traits::FromPrimitive;

/// Floating-point scalar the numeric layers are generic over.
pub trait Scalar: nalgebra::RealField + FromPrimitive + Copy + Default {
    /// Lossy conversion from `f64`, used for constants and configuration.
    fn from_config(x: f64) -> Self {
        Self::from_f64(x).expect("finite config value")
    }

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Shorthand for `F::from_config`.
pub fn cast<F: Scalar>(x: f64) -> F {
    F::from_config(x)
}
