//! Scalar abstraction shared by the analytic and simulation code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point type the engines are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances inside the crate are tuned for
/// `f64`; the `f32` instantiation is useful for quick scans where seven
/// significant digits are enough.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent finite values at all.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `(1 - e^{-x}) / x`, continuous at zero.
pub fn phi1<T: Scalar>(x: T) -> T {
    if x.abs() < T::of(1e-8) {
        T::one() - x / T::of(2.0)
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(x - 1 + e^{-x}) / x^2`, continuous at zero.
pub fn phi2<T: Scalar>(x: T) -> T {
    if x.abs() < T::of(1e-3) {
        // 1/2 - x/6 + x^2/24 - x^3/120
        T::of(0.5) - x / T::of(6.0) + x * x / T::of(24.0) - x * x * x / T::of(120.0)
    } else {
        (x + (-x).exp_m1()) / (x * x)
    }
}

/// `n!` as a scalar.
pub fn factorial<T: Scalar>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::of_usize(k))
}

/// Binomial coefficient `C(n, k)` as a scalar.
pub fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(T::one(), |acc, i| acc * T::of_usize(n - i) / T::of_usize(i + 1))
}
