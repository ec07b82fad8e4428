//! Floating-point scalar abstraction shared by every numeric routine in the crate.
//!
//! Everything above this module is written against [`Scalar`], so the same code
//! runs in `f64` (the default working precision) or `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Width in bytes of the little-endian encoding.
    const WIDTH: usize;

    /// Gauss error function.
    fn erf(self) -> Self;

    fn from_f64_lossy(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// Converts a small integer count (sizes, indices) to a scalar.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64_lossy(v)
    }
}

impl Scalar for f64 {
    const WIDTH: usize = 8;

    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const WIDTH: usize = 4;

    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}
