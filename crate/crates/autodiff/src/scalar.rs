use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar used throughout the workspace (implemented for `f32` and `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lower bound for guard constants such as the arccos clamp; never below a few ulps.
    #[inline]
    fn guard(v: f64) -> Self {
        let g = Self::lit(v);
        let floor = Self::epsilon() * Self::lit(4.0);
        if g < floor {
            floor
        } else {
            g
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Normalized sinc, `sin(pi x) / (pi x)` with `sinc(0) = 1`.
pub fn sinc<T: Real>(x: T) -> T {
    let px = T::PI() * x;
    if px.abs() < T::lit(1e-2) {
        let p2 = px * px;
        T::one() - p2 / T::lit(6.0) + p2 * p2 / T::lit(120.0) - p2 * p2 * p2 / T::lit(5040.0)
    } else {
        px.sin() / px
    }
}

/// Derivative of the normalized sinc.
pub fn sinc_prime<T: Real>(x: T) -> T {
    let pi = T::PI();
    let px = pi * x;
    if px.abs() < T::lit(1e-2) {
        let p2 = px * px;
        pi * px * (-T::one() / T::lit(3.0) + p2 / T::lit(30.0) - p2 * p2 / T::lit(840.0))
    } else {
        (px.cos() - px.sin() / px) / x
    }
}
