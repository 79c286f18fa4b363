//! Scalar abstraction for the float reference network.
//!
//! Training runs in `f32`; the gradient checks instantiate the same code in `f64`
//! so central differences are not swamped by rounding noise.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, NumAssign};

pub trait Real: Float + NumAssign + Sum + Default + Debug + Send + Sync + 'static {
    fn lit(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// `floor(255 * v + 0.5)` clamped to the byte range.
#[inline]
pub fn quantize_unit<T: Real>(v: T) -> u8 {
    let s = (v.as_f64() * 255.0 + 0.5).floor();
    s.clamp(0.0, 255.0) as u8
}
