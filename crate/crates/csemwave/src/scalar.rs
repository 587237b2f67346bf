//! Scalar abstraction: every numeric kernel in this crate is generic over a
//! floating-point type so the same code runs in `f32` or `f64`.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Floating-point scalar used for fields, spectra and model parameters.
///
/// Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Shorthand conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("value not representable in scalar type")
    }

    /// Widening conversion back to `f64` (used for logging and file output).
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over the crate scalar.
pub type Cplx<T> = num_complex::Complex<T>;

/// Vacuum magnetic permeability in H/m.
pub fn mu_vacuum<T: Real>() -> T {
    T::of(4.0e-7 * std::f64::consts::PI)
}

/// 2*pi as the scalar type.
pub fn two_pi<T: Real>() -> T {
    T::of(2.0 * std::f64::consts::PI)
}
