//! Driving subordinators: jump laws, Laplace exponents and pure-death rates.
//!
//! A [`SubordinatorSpec`] is a drift plus a finite list of compound-Poisson
//! components. The same type describes the input `Y` and the multiplicative
//! driver `Z`; the latter must have every jump in `(0, 1]`, which
//! [`DriverPair::new`] enforces.
//!
//! For a `Z`-spec with drift `c` and Lévy measure `ν`,
//!
//! ```text
//! η(α)  = c α + ∫ (1 - e^{-αx}) ν(dx)
//! μ_i   = c i + ∫ (1 - (1 - x)^i) ν(dx)
//! ```
//!
//! The rates `μ_i` are the death rates of the pure-death chain that drives the
//! transient moments of growth-collapse processes (see [`crate::moments`]).

use rand::distr::Open01;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{factorial, Scalar};

/// Law of a single jump size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpDistribution<T> {
    /// Deterministic jump of size `x`.
    Point { x: T },
    /// Uniform on `(0, b]`.
    Uniform { b: T },
    /// Exponential with the given mean.
    Exponential { mean: T },
    /// Erlang with integer shape `k` and the given mean (rate `k / mean`).
    Erlang { k: u32, mean: T },
}

impl<T: Scalar> JumpDistribution<T> {
    pub fn point(x: T) -> Self {
        Self::Point { x }
    }

    pub fn uniform(b: T) -> Self {
        Self::Uniform { b }
    }

    pub fn exponential(mean: T) -> Self {
        Self::Exponential { mean }
    }

    pub fn erlang(k: u32, mean: T) -> Self {
        Self::Erlang { k, mean }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Point { .. } => "point",
            Self::Uniform { .. } => "uniform",
            Self::Exponential { .. } => "exponential",
            Self::Erlang { .. } => "erlang",
        }
    }

    /// Checks positivity and finiteness of the parameters.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v.is_finite() && v > T::zero();
        match *self {
            Self::Point { x } if !ok(x) => Err(Error::InvalidParameter(format!("point mass x={x} must be positive"))),
            Self::Uniform { b } if !ok(b) => Err(Error::InvalidParameter(format!("uniform bound b={b} must be positive"))),
            Self::Exponential { mean } if !ok(mean) => {
                Err(Error::InvalidParameter(format!("exponential mean {mean} must be positive")))
            }
            Self::Erlang { k, mean } if k == 0 || !ok(mean) => Err(Error::InvalidParameter(format!(
                "erlang needs k >= 1 and positive mean (got k={k}, mean={mean})"
            ))),
            _ => Ok(()),
        }
    }

    /// Upper end of the support, `None` when unbounded.
    pub fn support_max(&self) -> Option<T> {
        match *self {
            Self::Point { x } => Some(x),
            Self::Uniform { b } => Some(b),
            Self::Exponential { .. } | Self::Erlang { .. } => None,
        }
    }

    /// `E[X^k]` in closed form.
    pub fn moment(&self, k: u32) -> T {
        match *self {
            Self::Point { x } => x.powi(k as i32),
            Self::Uniform { b } => b.powi(k as i32) / T::of_usize(k as usize + 1),
            Self::Exponential { mean } => mean.powi(k as i32) * factorial::<T>(k as usize),
            Self::Erlang { k: shape, mean } => {
                let scale = mean / T::of(shape as f64);
                (0..k).fold(T::one(), |acc, j| acc * T::of((shape + j) as f64) * scale)
            }
        }
    }

    /// `E[1 - e^{-αX}]` for `α >= 0`.
    pub fn laplace_complement(&self, alpha: T) -> T {
        match *self {
            Self::Point { x } => -(-alpha * x).exp_m1(),
            Self::Uniform { b } => {
                let y = alpha * b;
                if y < T::of(1e-6) {
                    y / T::of(2.0) - y * y / T::of(6.0) + y * y * y / T::of(24.0)
                } else {
                    // 1 - (1 - e^{-y})/y
                    y * crate::scalar::phi2(y)
                }
            }
            Self::Exponential { mean } => alpha * mean / (T::one() + alpha * mean),
            Self::Erlang { k, mean } => {
                let kf = T::of(k as f64);
                -(-kf * (alpha * mean / kf).ln_1p()).exp_m1()
            }
        }
    }

    /// `E[1 - (1 - X)^α]` for `α >= 0`; requires support inside `(0, 1]`.
    pub fn collapse_moment(&self, alpha: T) -> Result<T> {
        let one = T::one();
        match *self {
            Self::Point { x } if x <= one => {
                if alpha == T::zero() {
                    Ok(T::zero())
                } else if x == one {
                    Ok(one)
                } else {
                    Ok(-(alpha * (-x).ln_1p()).exp_m1())
                }
            }
            Self::Uniform { b } if b <= one => {
                // E[(1-X)^α] = (1 - (1-b)^{α+1}) / (b (α+1))
                let a1 = alpha + one;
                let survivor = if b == one {
                    one / a1
                } else {
                    -(a1 * (-b).ln_1p()).exp_m1() / (b * a1)
                };
                Ok(one - survivor)
            }
            _ => Err(Error::InvalidParameter(format!(
                "collapse moment needs support in (0,1], got {} jumps",
                self.kind_name()
            ))),
        }
    }

    /// Draws one jump size (strictly positive).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match *self {
            Self::Point { x } => x,
            Self::Uniform { b } => {
                let u: f64 = rng.sample(Open01);
                b * T::of(u)
            }
            Self::Exponential { mean } => {
                let u: f64 = rng.sample(Open01);
                -mean * T::of(u.ln())
            }
            Self::Erlang { k, mean } => {
                let log_sum: f64 = (0..k).map(|_| rng.sample::<f64, _>(Open01).ln()).sum();
                -(mean / T::of(k as f64)) * T::of(log_sum)
            }
        }
    }
}

/// One compound-Poisson component: jumps at rate `rate` with sizes from `dist`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpComponent<T> {
    pub rate: T,
    pub dist: JumpDistribution<T>,
}

/// Finite-activity subordinator: linear drift plus compound-Poisson components.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorSpec<T> {
    pub drift: T,
    pub components: Vec<JumpComponent<T>>,
}

/// Which driver a spec plays; `Z` carries the extra jump-size constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Y,
    Z,
}

impl<T: Scalar> SubordinatorSpec<T> {
    pub fn new(drift: T, components: Vec<JumpComponent<T>>) -> Self {
        Self { drift, components }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), Vec::new())
    }

    pub fn pure_drift(drift: T) -> Self {
        Self::new(drift, Vec::new())
    }

    /// Poisson(`rate`) collapses by the fixed fraction `q`.
    pub fn growth_collapse(rate: T, q: T) -> Self {
        Self::new(T::zero(), vec![JumpComponent { rate, dist: JumpDistribution::point(q) }])
    }

    /// Poisson(`rate`) total resets.
    pub fn clearing(rate: T) -> Self {
        Self::growth_collapse(rate, T::one())
    }

    /// Compound Poisson with exponential jumps and no drift.
    pub fn compound_exponential(rate: T, mean: T) -> Self {
        Self::new(T::zero(), vec![JumpComponent { rate, dist: JumpDistribution::exponential(mean) }])
    }

    pub fn with_component(mut self, rate: T, dist: JumpDistribution<T>) -> Self {
        self.components.push(JumpComponent { rate, dist });
        self
    }

    /// Validates parameters for the given role.
    pub fn validate(&self, role: Role) -> Result<()> {
        if !(self.drift.is_finite() && self.drift >= T::zero()) {
            return Err(Error::InvalidParameter(format!("drift {} must be finite and nonnegative", self.drift)));
        }
        for (index, comp) in self.components.iter().enumerate() {
            if !(comp.rate.is_finite() && comp.rate > T::zero()) {
                let msg = format!("rate {} must be positive", comp.rate);
                return Err(match role {
                    Role::Z => Error::ZSupport { index, reason: msg },
                    Role::Y => Error::InvalidParameter(format!("y.jumps[{index}]: {msg}")),
                });
            }
            if let Err(e) = comp.dist.validate() {
                return Err(match role {
                    Role::Z => Error::ZSupport { index, reason: e.to_string() },
                    Role::Y => Error::InvalidParameter(format!("y.jumps[{index}]: {e}")),
                });
            }
            if role == Role::Z {
                match comp.dist.support_max() {
                    None => {
                        return Err(Error::ZSupport {
                            index,
                            reason: format!(
                                "{} jumps have unbounded support; Z jumps must lie in (0,1]",
                                comp.dist.kind_name()
                            ),
                        })
                    }
                    Some(m) if m > T::one() => {
                        return Err(Error::ZSupport {
                            index,
                            reason: format!("jump size up to {m} exceeds 1; Z jumps must lie in (0,1]"),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    pub fn total_jump_rate(&self) -> T {
        self.components.iter().map(|c| c.rate).sum()
    }

    /// `E[S_1] = drift + Σ λ_k E[X_k]`.
    pub fn mean_rate(&self) -> T {
        self.drift + self.components.iter().map(|c| c.rate * c.dist.moment(1)).sum::<T>()
    }

    pub fn is_zero(&self) -> bool {
        self.drift == T::zero() && self.components.is_empty()
    }

    /// Laplace exponent `η(α) = drift·α + Σ λ_k E[1 - e^{-αX_k}]`.
    pub fn exponent(&self, alpha: T) -> Result<T> {
        if alpha < T::zero() || alpha.is_nan() {
            return Err(Error::NegativeArgument(format!("exponent argument α={alpha}")));
        }
        Ok(self.exponent_unchecked(alpha))
    }

    /// [`Self::exponent`] without the sign check, for hot loops with known `α >= 0`.
    #[inline]
    pub fn exponent_unchecked(&self, alpha: T) -> T {
        self.drift * alpha + self.components.iter().map(|c| c.rate * c.dist.laplace_complement(alpha)).sum::<T>()
    }

    /// `[η'(0), η''(0), ..., η^{(k_max)}(0)]`.
    pub fn exponent_derivatives_at_zero(&self, k_max: usize) -> Vec<T> {
        (1..=k_max)
            .map(|k| {
                let jump: T = self.components.iter().map(|c| c.rate * c.dist.moment(k as u32)).sum();
                if k == 1 {
                    self.drift + jump
                } else if k % 2 == 0 {
                    -jump
                } else {
                    jump
                }
            })
            .collect()
    }

    /// `ν{1}`: total rate of jumps of size exactly one.
    pub fn atom_rate_at_one(&self) -> T {
        self.components
            .iter()
            .filter(|c| matches!(c.dist, JumpDistribution::Point { x } if x == T::one()))
            .map(|c| c.rate)
            .sum()
    }

    /// `c·α + ∫ (1 - (1-x)^α) ν(dx)`, i.e. the exponent of `J` plus the atom rate.
    pub fn collapse_exponent(&self, alpha: T) -> Result<T> {
        let mut acc = self.drift * alpha;
        for c in &self.components {
            acc = acc + c.rate * c.dist.collapse_moment(alpha)?;
        }
        Ok(acc)
    }

    /// Death rates `μ_1..μ_n` by the direct integral form.
    pub fn death_rates(&self, n: usize) -> Result<Vec<T>> {
        if self.is_zero() {
            return Err(Error::ZeroSpec);
        }
        (1..=n).map(|i| self.collapse_exponent(T::of_usize(i))).collect()
    }
}

/// Validated pair of drivers `(Y, Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverPair<T> {
    pub y: SubordinatorSpec<T>,
    pub z: SubordinatorSpec<T>,
}

impl<T: Scalar> DriverPair<T> {
    pub fn new(y: SubordinatorSpec<T>, z: SubordinatorSpec<T>) -> Result<Self> {
        validate_spec(Self { y, z })
    }
}

/// Returns the pair unchanged if `Y` and `Z` satisfy their constraints.
pub fn validate_spec<T: Scalar>(pair: DriverPair<T>) -> Result<DriverPair<T>> {
    pair.y.validate(Role::Y)?;
    pair.z.validate(Role::Z)?;
    Ok(pair)
}
