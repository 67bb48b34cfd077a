use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::coder::stc;

/// Floating-point type used for costs, probabilities and the multiplier
/// search: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for finite inputs.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    fn from_f32_pixel(x: f32) -> Self {
        <Self as FromPrimitive>::from_f32(x).expect("f32 representable")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// One Viterbi column of the syndrome-trellis coder in this precision.
    #[doc(hidden)]
    #[allow(clippy::too_many_arguments)]
    fn trellis_column(
        cur: &[Self],
        next: &mut [Self],
        out: &mut [u8],
        p: usize,
        c0: Self,
        c1: Self,
        simd: bool,
    );
}

impl Scalar for f32 {
    fn trellis_column(
        cur: &[f32],
        next: &mut [f32],
        out: &mut [u8],
        p: usize,
        c0: f32,
        c1: f32,
        simd: bool,
    ) {
        stc::column_f32(cur, next, out, p, c0, c1, simd);
    }
}

impl Scalar for f64 {
    fn trellis_column(
        cur: &[f64],
        next: &mut [f64],
        out: &mut [u8],
        p: usize,
        c0: f64,
        c1: f64,
        simd: bool,
    ) {
        stc::column_f64(cur, next, out, p, c0, c1, simd);
    }
}
