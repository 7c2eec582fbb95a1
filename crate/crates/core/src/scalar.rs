//! Numeric types used for tolerances, similarities and rates.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

/// Scalar over which thresholds and ratios are computed: `f32`, `f64`, or
/// the exact [`Rational`](crate::Rational).
pub trait Scalar: Num + PartialOrd + Copy + Debug + Send + Sync + 'static {
    /// `num / den`, rounded once into the target type.
    fn from_ratio(num: u64, den: u64) -> Self;

    /// Nearest representable value to `v`; `None` for non-finite input or
    /// values the type cannot hold.
    fn from_f64(v: f64) -> Option<Self>;

    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(v: f64) -> Option<Self> {
        v.is_finite().then_some(v)
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_ratio(num: u64, den: u64) -> Self {
        // Divide in f64 first so the result is rounded once.
        (num as f64 / den as f64) as f32
    }

    fn from_f64(v: f64) -> Option<Self> {
        let narrowed = v as f32;
        narrowed.is_finite().then_some(narrowed)
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for Ratio<i64> {
    fn from_ratio(num: u64, den: u64) -> Self {
        Ratio::new(
            i64::try_from(num).expect("numerator fits in i64"),
            i64::try_from(den).expect("denominator fits in i64"),
        )
    }

    fn from_f64(v: f64) -> Option<Self> {
        Ratio::approximate_float(v)
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}
