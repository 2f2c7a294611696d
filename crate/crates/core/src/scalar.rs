//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra::{Complex, ComplexField, RealField};
use num_traits::{FloatConst, ToPrimitive};
use rustfft::FftPlanner;
use std::fmt::{Debug, Display};
use std::str::FromStr;

/// Real floating-point scalar usable with the dense linear algebra and FFT
/// backends. Implemented for `f32` and `f64`.
pub trait Real:
    RealField + Copy + ToPrimitive + FloatConst + FromStr + Debug + Display + Send + Sync + 'static
{
    /// Machine epsilon as an `f64`, used to scale numerical tolerances.
    const EPS: f64;

    /// In-place forward DFT, `X_k = Σ_n x_n e^{-2πi kn/L}` (no scaling).
    fn fft_forward(buf: &mut [Complex<Self>]);

    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Converts a count.
    #[inline]
    fn count(n: usize) -> Self {
        nalgebra::convert(n as f64)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite real")
    }

    /// Absolute value. `RealField` inherits `abs` from two supertraits, so
    /// a plain method call is ambiguous in generic code.
    #[inline]
    fn mag(self) -> Self {
        <Self as ComplexField>::abs(self)
    }

    /// Relative tolerance that is `floor` for `f64` and widened to a small
    /// multiple of epsilon for coarser types.
    #[inline]
    fn tol(floor: f64) -> Self {
        Self::lit(floor.max(64.0 * Self::EPS))
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            const EPS: f64 = <$t>::EPSILON as f64;

            fn fft_forward(buf: &mut [Complex<$t>]) {
                if buf.len() < 2 {
                    return;
                }
                let fft = FftPlanner::<$t>::new().plan_fft_forward(buf.len());
                fft.process(buf);
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
