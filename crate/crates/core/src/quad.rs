//! Adaptive Gauss–Legendre quadrature for smooth integrands on short intervals.

use crate::scalar::Scalar;

// 7-point Gauss–Legendre nodes and weights on [-1, 1].
const NODES: [f64; 7] = [
    0.0,
    0.405_845_151_377_397_2,
    -0.405_845_151_377_397_2,
    0.741_531_185_599_394_4,
    -0.741_531_185_599_394_4,
    0.949_107_912_342_758_5,
    -0.949_107_912_342_758_5,
];
const WEIGHTS: [f64; 7] = [
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
    0.129_484_966_168_869_7,
];

const MAX_DEPTH: u32 = 40;

fn rule<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> T {
    let half = (b - a) / T::of(2.0);
    let mid = (a + b) / T::of(2.0);
    NODES.iter().zip(WEIGHTS.iter()).map(|(&x, &w)| T::of(w) * f(mid + half * T::of(x))).sum::<T>() * half
}

fn refine<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T, whole: T, tol: T, depth: u32) -> T {
    let mid = (a + b) / T::of(2.0);
    let left = rule(f, a, mid);
    let right = rule(f, mid, b);
    let split = left + right;
    if (split - whole).abs() <= tol || depth >= MAX_DEPTH || mid <= a || mid >= b {
        return split;
    }
    let half_tol = tol / T::of(2.0);
    refine(f, a, mid, left, half_tol, depth + 1) + refine(f, mid, b, right, half_tol, depth + 1)
}

/// `∫_a^b f` to absolute tolerance `tol` (7-point rule against its bisection).
pub fn gauss_legendre_adaptive<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> T {
    if b == a {
        return T::zero();
    }
    let whole = rule(&f, a, b);
    refine(&f, a, b, whole, tol.max(T::epsilon()), 0)
}
