//! Closed-form transient and stationary moments.
//!
//! With `Y_t = r t`, deterministic `X_0 = x` and `Z` a nonzero subordinator, the
//! `n`-th moment of `X_t` is driven by a pure-death chain on `{0, ..., n}` with
//! death rates `μ_i` (see [`SubordinatorSpec::death_rates`]):
//!
//! ```text
//! E X_t^n = n!/∏μ_i · ( p_{n0}(t) + Σ_k x^k ∏_{i≤k} μ_i / k! · p_{nk}(t) )
//! ```
//!
//! Transition probabilities come from uniformization, which is exact for tied
//! rates (clearing processes have `μ_i ≡ λ`). The partial-fraction form and the
//! simplex recursion are kept as independent routes; both need distinct rates.

use crate::error::{Error, Result};
use crate::model::SubordinatorSpec;
use crate::scalar::{factorial, phi1, Scalar};

/// Largest moment order accepted by the moment routines.
pub const MAX_MOMENT_ORDER: usize = 12;

/// Minimum argument gap accepted by the simplex recursion.
pub const SIMPLEX_TIE_TOL: f64 = 1e-6;

/// Truncation level of the uniformization Poisson series.
pub const UNIFORMIZATION_TAIL: f64 = 1e-13;

const MERGE_TOL: f64 = 1e-12;

/// `f(t) = Σ c_i e^{-ρ_i t}` with distinct rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpMixture<T> {
    terms: Vec<(T, T)>,
}

impl<T: Scalar> ExpMixture<T> {
    /// Builds a mixture from `(coefficient, rate)` pairs, merging rates that agree to 1e-12.
    pub fn new(mut terms: Vec<(T, T)>) -> Self {
        terms.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite rates"));
        let mut merged: Vec<(T, T)> = Vec::with_capacity(terms.len());
        for (c, rho) in terms {
            match merged.last_mut() {
                Some(last) if (rho - last.1).abs() <= T::of(MERGE_TOL) => last.0 = last.0 + c,
                _ => merged.push((c, rho)),
            }
        }
        Self { terms: merged }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![(c, T::zero())])
    }

    pub fn terms(&self) -> &[(T, T)] {
        &self.terms
    }

    pub fn eval(&self, t: T) -> T {
        self.terms.iter().map(|&(c, rho)| c * (-rho * t).exp()).sum()
    }

    pub fn scale(&self, k: T) -> Self {
        Self { terms: self.terms.iter().map(|&(c, rho)| (c * k, rho)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.terms.iter().chain(other.terms.iter()).copied().collect())
    }

    /// Value as `t → ∞`: the coefficient of the zero rate.
    pub fn limit(&self) -> T {
        self.terms.iter().filter(|t| t.1 == T::zero()).map(|t| t.0).sum()
    }
}

/// `∫_0^∞ e^{-θt} m(t) dt = Σ c_i / (θ + ρ_i)`.
pub fn laplace_of_mixture<T: Scalar>(m: &ExpMixture<T>, theta: T) -> Result<T> {
    let mut acc = T::zero();
    for &(c, rho) in m.terms() {
        let d = theta + rho;
        if !(d > T::zero()) {
            return Err(Error::InvalidParameter(format!("θ + ρ = {d} must be positive")));
        }
        acc = acc + c / d;
    }
    Ok(acc)
}

/// `E X_t = EX_0 e^{-EZ_1 t} + EY_1 (1 - e^{-EZ_1 t}) / EZ_1`, reducing to
/// `EX_0 + EY_1 t` when `EZ_1 = 0`.
pub fn transient_mean<T: Scalar>(ex0: T, ey1: T, z: &SubordinatorSpec<T>, t: T) -> T {
    let mu = z.mean_rate();
    ex0 * (-mu * t).exp() + ey1 * t * phi1(mu * t)
}

/// [`transient_mean`] as an exponential mixture (needs `EZ_1 > 0`).
pub fn transient_mean_mixture<T: Scalar>(ex0: T, ey1: T, z: &SubordinatorSpec<T>) -> Result<ExpMixture<T>> {
    let mu = z.mean_rate();
    if !(mu > T::zero()) {
        return Err(Error::ZeroSpec);
    }
    Ok(ExpMixture::new(vec![(ey1 / mu, T::zero()), (ex0 - ey1 / mu, mu)]))
}

/// Mean from a tabulated `φ(s) = E e^{-J_s} 1{N_s = 0}` with half-widths propagated linearly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericMean<T> {
    pub value: T,
    pub half_width: T,
}

/// `EX_0 φ(t) + EY_1 ∫_0^t φ(s) ds` by the trapezoidal rule on `grid`.
pub fn transient_mean_numeric<T: Scalar>(
    ex0: T,
    ey1: T,
    grid: &[T],
    phi: &[T],
    phi_half_width: Option<&[T]>,
    t: T,
) -> Result<NumericMean<T>> {
    if grid.len() != phi.len() || phi_half_width.is_some_and(|h| h.len() != grid.len()) {
        return Err(Error::Mismatch("grid and φ lengths differ".into()));
    }
    if grid.is_empty() || grid[0] != T::zero() || *grid.last().unwrap() < t || t < T::zero() {
        return Err(Error::GridMismatch(format!("grid must start at 0 and reach t={t}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch("grid must be strictly increasing".into()));
    }
    let zeros = vec![T::zero(); grid.len()];
    let hw = phi_half_width.unwrap_or(&zeros);
    let mut integral = T::zero();
    let mut integral_hw = T::zero();
    let mut at_t = (phi[0], hw[0]);
    for i in 1..grid.len() {
        let (a, b) = (grid[i - 1], grid[i]);
        if a >= t {
            break;
        }
        let half = T::of(0.5);
        if b <= t {
            integral = integral + half * (b - a) * (phi[i - 1] + phi[i]);
            integral_hw = integral_hw + half * (b - a) * (hw[i - 1] + hw[i]);
            at_t = (phi[i], hw[i]);
        } else {
            let w = (t - a) / (b - a);
            let pt = phi[i - 1] + w * (phi[i] - phi[i - 1]);
            let ht = hw[i - 1] + w * (hw[i] - hw[i - 1]);
            integral = integral + half * (t - a) * (phi[i - 1] + pt);
            integral_hw = integral_hw + half * (t - a) * (hw[i - 1] + ht);
            at_t = (pt, ht);
        }
    }
    Ok(NumericMean {
        value: ex0 * at_t.0 + ey1 * integral,
        half_width: ex0.abs() * at_t.1 + ey1.abs() * integral_hw,
    })
}

/// `∫_0^1 s^p e^{-x s} ds` for `x >= 0`.
fn incomplete_moment<T: Scalar>(p: u32, x: T) -> T {
    if x < T::one() {
        let mut term = T::one();
        let mut acc = T::zero();
        for k in 0..30u32 {
            if k > 0 {
                term = term * (-x) / T::of(k as f64);
            }
            acc = acc + term / T::of((k + p + 1) as f64);
        }
        acc
    } else {
        // p!/x^{p+1} (1 - e^{-x} Σ_{j≤p} x^j/j!)
        let mut partial = T::zero();
        let mut term = T::one();
        for j in 0..=p {
            if j > 0 {
                term = term * x / T::of(j as f64);
            }
            partial = partial + term;
        }
        factorial::<T>(p as usize) / x.powi(p as i32 + 1) * (T::one() - (-x).exp() * partial)
    }
}

struct SecondMomentParts<T> {
    dy1: T,
    dy2: T,
    mu1: T,
    mu2: T,
}

fn second_moment_parts<T: Scalar>(y: &SubordinatorSpec<T>, z: &SubordinatorSpec<T>) -> Result<SecondMomentParts<T>> {
    if z.is_zero() {
        return Err(Error::ZeroSpec);
    }
    let dy = y.exponent_derivatives_at_zero(2);
    let dz = z.exponent_derivatives_at_zero(2);
    let mu1 = dz[0];
    let mu2 = T::of(2.0) * dz[0] + dz[1];
    Ok(SecondMomentParts { dy1: dy[0], dy2: dy[1], mu1, mu2 })
}

/// `E X_t^2` for `X_0 = 0` and Lévy `Y`, `Z`.
///
/// Uses `μ_1 = η_z'(0)` and `μ_2 = 2η_z'(0) + η_z''(0)`; when `μ_2 = μ_1` (pure
/// clearing) the divided difference is replaced by its limit, which carries a
/// `t e^{-μ_1 t}` term.
pub fn transient_second_moment<T: Scalar>(y: &SubordinatorSpec<T>, z: &SubordinatorSpec<T>, t: T) -> Result<T> {
    if t < T::zero() {
        return Err(Error::NegativeArgument(format!("time {t}")));
    }
    let SecondMomentParts { dy1, dy2, mu1, mu2 } = second_moment_parts(y, z)?;
    let h = |mu: T| t * phi1(mu * t);
    let delta = mu2 - mu1;
    let divided = if delta <= T::of(1e-7) * mu1 {
        // [h(μ1) - h(μ1+δ)]/δ = ∫ s e^{-μ1 s} ds - δ/2 ∫ s² e^{-μ1 s} ds + O(δ²)
        let x = mu1 * t;
        t * t * incomplete_moment(1, x) - delta / T::of(2.0) * t * t * t * incomplete_moment(2, x)
    } else {
        (h(mu1) - h(mu2)) / delta
    };
    Ok(T::of(2.0) * dy1 * dy1 * divided - dy2 * h(mu2))
}

/// [`transient_second_moment`] as an exponential mixture (distinct `μ_1 ≠ μ_2` only).
pub fn second_moment_mixture<T: Scalar>(y: &SubordinatorSpec<T>, z: &SubordinatorSpec<T>) -> Result<ExpMixture<T>> {
    let SecondMomentParts { dy1, dy2, mu1, mu2 } = second_moment_parts(y, z)?;
    let delta = mu2 - mu1;
    if delta <= T::of(1e-7) * mu1 {
        return Err(Error::Ties { gap: delta.as_f64(), tol: 1e-7 * mu1.as_f64() });
    }
    let k = T::of(2.0) * dy1 * dy1 / delta;
    Ok(ExpMixture::new(vec![
        (k * (T::one() / mu1 - T::one() / mu2) - dy2 / mu2, T::zero()),
        (-k / mu1, mu1),
        (k / mu2 + dy2 / mu2, mu2),
    ]))
}

/// `lim E X_t^2 = (2η_y'(0)² - η_z'(0) η_y''(0)) / (η_z'(0) (2η_z'(0) + η_z''(0)))`.
pub fn stationary_second_moment<T: Scalar>(y: &SubordinatorSpec<T>, z: &SubordinatorSpec<T>) -> Result<T> {
    let SecondMomentParts { dy1, dy2, mu1, mu2 } = second_moment_parts(y, z)?;
    Ok((T::of(2.0) * dy1 * dy1 - mu1 * dy2) / (mu1 * mu2))
}

/// Pure-death chain `i → i-1` at rate `μ_i`, state 0 absorbing.
#[derive(Debug, Clone, PartialEq)]
pub struct DeathModel<T> {
    rates: Vec<T>,
}

impl<T: Scalar> DeathModel<T> {
    pub fn new(rates: Vec<T>) -> Result<Self> {
        if rates.iter().any(|&m| !(m > T::zero() && m.is_finite())) {
            return Err(Error::InvalidParameter("death rates must be positive and finite".into()));
        }
        if rates.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("death rates must be nondecreasing".into()));
        }
        Ok(Self { rates })
    }

    /// Rates `μ_1..μ_n` of a `Z`-spec.
    pub fn from_z(z: &SubordinatorSpec<T>, n: usize) -> Result<Self> {
        Self::new(z.death_rates(n)?)
    }

    pub fn rates(&self) -> &[T] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    fn check_start(&self, n: usize) -> Result<()> {
        if n > self.rates.len() {
            return Err(Error::Mismatch(format!("start state {n} beyond {} rates", self.rates.len())));
        }
        Ok(())
    }
}

/// Propagates the row vector `v` through `e^{Q τ}` by uniformization.
fn uniformize<T: Scalar>(rates: &[T], v: &[T], lambda: T, tau: T) -> Vec<T> {
    let n = v.len();
    let lt = lambda * tau;
    let mut weight = (-lt).exp();
    let mut cur = v.to_vec();
    let mut acc: Vec<T> = cur.iter().map(|&p| p * weight).collect();
    // relative to the smallest entry, which is stricter than the absolute bound
    let tail_tol = T::of(UNIFORMIZATION_TAIL * 1e-3).max(T::epsilon());
    let floor = T::of(1e-290).max(T::min_positive_value());
    let mut m = 0usize;
    loop {
        m += 1;
        // cur <- cur P, P = I + Q/Λ
        let mut next = vec![T::zero(); n];
        for i in 0..n {
            if cur[i] == T::zero() {
                continue;
            }
            if i == 0 {
                next[0] = next[0] + cur[0];
            } else {
                let down = rates[i - 1] / lambda;
                next[i] = next[i] + cur[i] * (T::one() - down);
                next[i - 1] = next[i - 1] + cur[i] * down;
            }
        }
        cur = next;
        weight = weight * lt / T::of_usize(m);
        for (a, &c) in acc.iter_mut().zip(&cur) {
            *a = *a + weight * c;
        }
        let rho = lt / T::of_usize(m + 1);
        if m + 1 >= n && rho < T::one() {
            let tail = weight * rho / (T::one() - rho);
            let smallest = acc.iter().copied().filter(|&a| a > T::zero()).fold(T::one(), T::min);
            if tail < tail_tol * smallest.max(floor) || weight == T::zero() {
                break;
            }
        }
        if m > 1_000_000 {
            break;
        }
    }
    acc
}

/// Row `[p_{n,0}(t), ..., p_{n,n}(t)]` of the death chain, by uniformization
/// with rate `Λ = max μ_i`. The Poisson series is cut once its tail is below
/// 1e-16 times the smallest nonzero entry (so always below 1e-13).
pub fn death_transition_row<T: Scalar>(model: &DeathModel<T>, n: usize, t: T) -> Result<Vec<T>> {
    if !(t >= T::zero()) {
        return Err(Error::NegativeArgument(format!("time {t}")));
    }
    model.check_start(n)?;
    let mut v = vec![T::zero(); n + 1];
    v[n] = T::one();
    if n == 0 || t == T::zero() {
        return Ok(v);
    }
    let rates = &model.rates()[..n];
    let lambda = rates.iter().copied().fold(T::zero(), T::max);
    // keep e^{-Λτ} well inside the exponent range
    let pieces = (lambda * t / T::of(400.0)).ceil().max(T::one());
    let tau = t / pieces;
    for _ in 0..pieces.to_usize().unwrap_or(1) {
        v = uniformize(rates, &v, lambda, tau);
    }
    Ok(v)
}

fn require_distinct<T: Scalar>(rates: &[T]) -> Result<()> {
    for i in 0..rates.len() {
        for j in 0..i {
            let gap = (rates[i] - rates[j]).abs();
            let tol = T::of(1e-9) * rates[i].abs().max(rates[j].abs());
            if gap <= tol {
                return Err(Error::Ties { gap: gap.as_f64(), tol: tol.as_f64() });
            }
        }
    }
    Ok(())
}

/// Partial-fraction coefficients of each `p_{nk}` as exponential mixtures.
fn transition_mixtures<T: Scalar>(rates: &[T], n: usize) -> Result<Vec<ExpMixture<T>>> {
    let mu = &rates[..n];
    require_distinct(mu)?;
    let mut rows = Vec::with_capacity(n + 1);
    // p_{n0}: hypoexponential CDF
    let mut p0 = vec![(T::one(), T::zero())];
    for i in 0..n {
        let c = (0..n).filter(|&j| j != i).fold(T::one(), |acc, j| acc * mu[j] / (mu[j] - mu[i]));
        p0.push((-c, mu[i]));
    }
    rows.push(ExpMixture::new(p0));
    // p_{nk}, k >= 1 (states are 1-based: rate of state k is mu[k-1])
    for k in 1..=n {
        let lead: T = (k + 1..=n).fold(T::one(), |acc, j| acc * mu[j - 1]);
        let terms = (k..=n)
            .map(|i| {
                let denom = (k..=n).filter(|&j| j != i).fold(T::one(), |acc, j| acc * (mu[j - 1] - mu[i - 1]));
                (lead / denom, mu[i - 1])
            })
            .collect();
        rows.push(ExpMixture::new(terms));
    }
    Ok(rows)
}

/// Row of the death chain by partial fractions; distinct rates only.
pub fn death_transition_row_partial_fractions<T: Scalar>(model: &DeathModel<T>, n: usize, t: T) -> Result<Vec<T>> {
    if !(t >= T::zero()) {
        return Err(Error::NegativeArgument(format!("time {t}")));
    }
    model.check_start(n)?;
    Ok(transition_mixtures(model.rates(), n)?.iter().map(|m| m.eval(t)).collect())
}

/// Weight of `p_{nk}` in the moment formula: `x^k (n!/k!) / ∏_{i=k+1}^n μ_i`.
fn state_weights<T: Scalar>(x: T, n: usize, rates: &[T]) -> Vec<T> {
    (0..=n)
        .map(|k| {
            let ratio = (k + 1..=n).fold(T::one(), |acc, i| acc * T::of_usize(i) / rates[i - 1]);
            if k == 0 {
                ratio
            } else {
                x.powi(k as i32) * ratio
            }
        })
        .collect()
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("moment order must be at least 1".into()));
    }
    if n > MAX_MOMENT_ORDER {
        return Err(Error::OrderTooLarge { n, max: MAX_MOMENT_ORDER });
    }
    Ok(())
}

/// `E X_t^n` for `Y_t = r t`, `X_0 = x`, through the death chain of `z`.
pub fn moment_linear_growth<T: Scalar>(x: T, n: usize, t: T, z: &SubordinatorSpec<T>, r: T) -> Result<T> {
    check_order(n)?;
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter(format!("growth rate r={r} must be positive")));
    }
    let model = DeathModel::from_z(z, n)?;
    Ok(moment_from_model(x / r, n, t, &model)? * r.powi(n as i32))
}

/// `E X_t^n` for unit growth rate and a given death model.
pub fn moment_from_model<T: Scalar>(x: T, n: usize, t: T, model: &DeathModel<T>) -> Result<T> {
    check_order(n)?;
    let row = death_transition_row(model, n, t)?;
    let w = state_weights(x, n, model.rates());
    Ok(w.iter().zip(&row).map(|(&a, &b)| a * b).sum())
}

/// `t ↦ E X_t^n` as an exponential mixture (distinct rates; unit growth rate).
pub fn moment_mixture<T: Scalar>(x: T, n: usize, model: &DeathModel<T>) -> Result<ExpMixture<T>> {
    check_order(n)?;
    model.check_start(n)?;
    let rows = transition_mixtures(model.rates(), n)?;
    let w = state_weights(x, n, model.rates());
    Ok(rows.iter().zip(&w).fold(ExpMixture::new(Vec::new()), |acc, (m, &wk)| acc.add(&m.scale(wk))))
}

/// `t ↦ E X_t^n` for `Y_t = r t` as an exponential mixture.
pub fn moment_curve<T: Scalar>(x: T, n: usize, z: &SubordinatorSpec<T>, r: T) -> Result<ExpMixture<T>> {
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter(format!("growth rate r={r} must be positive")));
    }
    let model = DeathModel::from_z(z, n)?;
    Ok(moment_mixture(x / r, n, &model)?.scale(r.powi(n as i32)))
}

/// `E X_T^n` at an independent `T ~ exp(θ)` (unit growth rate, `X_0 = x`).
pub fn moment_at_exponential_time<T: Scalar>(x: T, n: usize, theta: T, model: &DeathModel<T>) -> Result<T> {
    check_order(n)?;
    model.check_start(n)?;
    if !(theta > T::zero()) {
        return Err(Error::InvalidParameter(format!("θ={theta} must be positive")));
    }
    let mu = model.rates();
    // tail[k] = ∏_{i=k}^n μ_i/(μ_i+θ) for k = 1..=n+1 (1-based), tail[n+1] = 1
    let mut tail = vec![T::one(); n + 2];
    for k in (1..=n).rev() {
        tail[k] = tail[k + 1] * mu[k - 1] / (mu[k - 1] + theta);
    }
    let w = state_weights(x, n, mu);
    let mut acc = w[0] * tail[1];
    for k in 1..=n {
        acc = acc + w[k] * (tail[k + 1] - tail[k]);
    }
    Ok(acc)
}

fn check_simplex_args<T: Scalar>(sorted: &[T]) -> Result<()> {
    let tol = T::of(SIMPLEX_TIE_TOL);
    for &a in sorted {
        if a.abs() <= tol {
            return Err(Error::Ties { gap: a.abs().as_f64(), tol: SIMPLEX_TIE_TOL });
        }
    }
    for w in sorted.windows(2) {
        if w[1] - w[0] <= tol {
            return Err(Error::Ties { gap: (w[1] - w[0]).as_f64(), tol: SIMPLEX_TIE_TOL });
        }
    }
    Ok(())
}

fn simplex_sorted<T: Scalar>(a: &[T]) -> T {
    match a.split_first() {
        None => T::one(),
        Some((&a1, rest)) => {
            let shifted: Vec<T> = rest.iter().map(|&ai| ai - a1).collect();
            (simplex_sorted(rest) - (-a1).exp() * simplex_sorted(&shifted)) / a1
        }
    }
}

/// `f_n(a) = ∫_{x ≥ 0, Σx ≤ 1} exp(-Σ a_i x_i) dx`, by the divided-difference
/// recursion. The integrand is symmetric so inputs are sorted first. Arguments
/// closer than 1e-6 to each other or to zero return [`Error::Ties`].
pub fn simplex_recursion<T: Scalar>(a: &[T]) -> Result<T> {
    let mut sorted = a.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("simplex arguments must be finite".into()));
    }
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    check_simplex_args(&sorted)?;
    Ok(simplex_sorted(&sorted))
}

fn simplex_increments<T: Scalar>(b: &[T]) -> T {
    match b {
        [] => T::one(),
        [b1] => phi1(*b1),
        [b1, b2, rest @ ..] => {
            let mut merged = Vec::with_capacity(rest.len() + 1);
            merged.push(*b1 + *b2);
            merged.extend_from_slice(rest);
            (simplex_increments(&merged) - (-*b1).exp() * simplex_increments(&b[1..])) / *b1
        }
    }
}

/// `g_n(b) = f_n(b_1, b_1 + b_2, ..., b_1 + ... + b_n)` by its own recursion;
/// every increment must exceed 1e-6.
pub fn simplex_recursion_increments<T: Scalar>(b: &[T]) -> Result<T> {
    let tol = T::of(SIMPLEX_TIE_TOL);
    if let Some(&bad) = b.iter().find(|&&v| !(v > tol)) {
        return Err(Error::Ties { gap: bad.as_f64(), tol: SIMPLEX_TIE_TOL });
    }
    Ok(simplex_increments(b))
}

/// `E X_t^n = t^n n! f_n(μ_1 t, ..., μ_n t)` for `X_0 = 0` and unit growth rate.
pub fn moment_via_simplex<T: Scalar>(n: usize, t: T, model: &DeathModel<T>) -> Result<T> {
    check_order(n)?;
    model.check_start(n)?;
    if t == T::zero() {
        return Ok(T::zero());
    }
    let args: Vec<T> = model.rates()[..n].iter().map(|&m| m * t).collect();
    Ok(t.powi(n as i32) * factorial::<T>(n) * simplex_recursion(&args)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn gc() -> SubordinatorSpec<f64> {
        SubordinatorSpec::growth_collapse(1.0, 0.5)
    }

    #[test]
    fn mean_examples() {
        let z = SubordinatorSpec::pure_drift(1.0);
        assert!(close(transient_mean(0.0, 1.0, &z, 1.0), 1.0 - (-1.0f64).exp(), 1e-15));
        let none = SubordinatorSpec::zero();
        assert_eq!(transient_mean(2.0, 1.5, &none, 3.0), 2.0 + 4.5);
        assert!(close(transient_mean(0.0, 1.0, &gc(), 200.0), 2.0, 1e-14));
        let m = transient_mean_mixture(0.5, 1.0, &gc()).unwrap();
        assert!(close(m.eval(1.7), transient_mean(0.5, 1.0, &gc(), 1.7), 1e-14));
        assert!(transient_mean_mixture(0.0, 1.0, &none).is_err());
    }

    #[test]
    fn numeric_mean_examples() {
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
        let ones = vec![1.0; grid.len()];
        let r = transient_mean_numeric(2.0, 3.0, &grid, &ones, None, 1.0).unwrap();
        assert!(close(r.value, 5.0, 1e-14));
        let phi: Vec<f64> = grid.iter().map(|s| (-s).exp()).collect();
        let r = transient_mean_numeric(0.0, 1.0, &grid, &phi, None, 1.0).unwrap();
        assert!((r.value - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
        // t between grid points
        let r = transient_mean_numeric(0.0, 1.0, &grid, &phi, None, 0.5005).unwrap();
        assert!((r.value - (1.0 - (-0.5005f64).exp())).abs() < 1e-6);
        let hw = vec![0.01; grid.len()];
        let r = transient_mean_numeric(1.0, 2.0, &grid, &phi, Some(&hw), 1.0).unwrap();
        assert!(close(r.half_width, 0.01 + 2.0 * 0.01, 1e-12));
        assert!(transient_mean_numeric(0.0, 1.0, &grid, &phi, None, 1.5).is_err());
        assert!(transient_mean_numeric(0.0, 1.0, &grid[1..], &phi[1..], None, 0.5).is_err());
    }

    #[test]
    fn second_moment_examples() {
        let shot_y = SubordinatorSpec::compound_exponential(1.0, 1.0);
        let shot_z = SubordinatorSpec::pure_drift(1.0);
        for &t in &[0.0f64, 0.3, 1.0, 4.0] {
            let v = transient_second_moment(&shot_y, &shot_z, t).unwrap();
            assert!(close(v, 2.0 * (1.0 - (-t).exp()), 1e-14), "t={t}");
        }
        assert!(close(stationary_second_moment(&shot_y, &shot_z).unwrap(), 2.0, 1e-15));
        let y = SubordinatorSpec::pure_drift(1.0);
        assert!(close(stationary_second_moment(&y, &gc()).unwrap(), 16.0 / 3.0, 1e-15));
        assert!(close(transient_second_moment(&y, &gc(), 400.0).unwrap(), 16.0 / 3.0, 1e-12));
        let clear = SubordinatorSpec::clearing(1.0);
        assert!(close(stationary_second_moment(&y, &clear).unwrap(), 2.0, 1e-15));
        assert!(transient_second_moment(&y, &SubordinatorSpec::zero(), 1.0).is_err());
    }

    #[test]
    fn clearing_second_moment_uses_limit_branch() {
        // age process A_t = min(t, time since last event): E A_t^2 = 2(1 - e^{-t}(1+t))
        let y = SubordinatorSpec::pure_drift(1.0);
        let z = SubordinatorSpec::clearing(1.0);
        for &t in &[0.01f64, 0.5, 1.0, 3.0, 30.0] {
            let expect = 2.0 * (1.0 - (-t).exp() * (1.0 + t));
            let got = transient_second_moment(&y, &z, t).unwrap();
            assert!((got - expect).abs() <= 1e-13 * (1.0 + expect), "t={t}: {got} vs {expect}");
        }
        assert!(second_moment_mixture(&y, &z).is_err());
        // nearly tied: add a tiny drift and compare both branches against each other
        let near = SubordinatorSpec::clearing(1.0).with_component(1e-9, crate::model::JumpDistribution::point(0.5));
        let far = SubordinatorSpec::clearing(1.0).with_component(1e-3, crate::model::JumpDistribution::point(0.5));
        let a = transient_second_moment(&y, &near, 2.0).unwrap();
        let b = transient_second_moment(&y, &far, 2.0).unwrap();
        let c = transient_second_moment(&y, &z, 2.0).unwrap();
        assert!((a - c).abs() < 1e-8 && (b - c).abs() < 1e-2);
    }

    #[test]
    fn second_moment_mixture_matches_direct() {
        let y = SubordinatorSpec::compound_exponential(0.7, 1.3).with_component(0.2, crate::model::JumpDistribution::uniform(2.0));
        let z = gc().with_component(0.5, crate::model::JumpDistribution::uniform(0.8));
        let m = second_moment_mixture(&y, &z).unwrap();
        for &t in &[0.0, 0.2, 1.0, 5.0] {
            assert!(close(m.eval(t), transient_second_moment(&y, &z, t).unwrap(), 1e-12));
        }
        assert!(close(m.limit(), stationary_second_moment(&y, &z).unwrap(), 1e-12));
    }

    #[test]
    fn transition_row_examples() {
        let one = DeathModel::new(vec![0.8]).unwrap();
        let row = death_transition_row(&one, 1, 1.5).unwrap();
        assert!(close(row[0], 1.0 - (-1.2f64).exp(), 1e-14));
        let m = DeathModel::new(vec![0.5_f64, 0.75]).unwrap();
        let row = death_transition_row(&m, 2, 2.0).unwrap();
        // closed-form two-state values: e^{-1.5}, 3(e^{-1} - e^{-1.5}), remainder
        assert!(close(row[2], (-1.5f64).exp(), 1e-14));
        assert!(close(row[1], 3.0 * ((-1.0f64).exp() - (-1.5f64).exp()), 1e-14));
        assert!((row[0] - 0.342621996782533).abs() < 1e-14);
        let tied = DeathModel::new(vec![1.0, 1.0]).unwrap();
        let row = death_transition_row(&tied, 2, 1.0).unwrap();
        assert!((row[0] - (1.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-14);
        assert!(death_transition_row(&m, 2, -1.0).is_err());
        assert!(death_transition_row(&m, 3, 1.0).is_err());
        assert!(death_transition_row_partial_fractions(&tied, 2, 1.0).is_err());
    }

    #[test]
    fn uniformization_handles_large_times() {
        let m = DeathModel::new(vec![3.0, 5.0, 9.0]).unwrap();
        let row = death_transition_row(&m, 3, 500.0).unwrap();
        assert!(close(row[0], 1.0, 1e-14));
        let pf = death_transition_row_partial_fractions(&m, 3, 60.0).unwrap();
        let un = death_transition_row(&m, 3, 60.0).unwrap();
        for (a, b) in pf.iter().zip(&un) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_growth_examples() {
        let v = moment_linear_growth(0.0, 1, 2.0, &gc(), 1.0).unwrap();
        assert!(close(v, 2.0 * (1.0 - (-1.0f64).exp()), 1e-14));
        let v = moment_linear_growth(0.0, 2, 2.0, &gc(), 1.0).unwrap();
        // (2/0.375) p_20(2)
        assert!((v - 1.827317316173508).abs() < 1e-13, "{v}");
        let v = moment_linear_growth(3.0, 1, 1.0, &SubordinatorSpec::clearing(1.0), 1.0).unwrap();
        assert!(close(v, (1.0 - (-1.0f64).exp()) + 3.0 * (-1.0f64).exp(), 1e-14));
        assert!(matches!(
            moment_linear_growth(0.0, 13, 1.0, &gc(), 1.0),
            Err(Error::OrderTooLarge { n: 13, max: 12 })
        ));
        assert!(moment_linear_growth(0.0, 2, 1.0, &SubordinatorSpec::zero(), 1.0).is_err());
    }

    #[test]
    fn growth_rate_scaling() {
        // X/r solves the r = 1 equation from x/r
        let z = gc();
        let (x, r, t) = (0.7, 2.5, 1.3);
        for n in 1..=4 {
            let scaled = moment_linear_growth(x, n, t, &z, r).unwrap();
            let unit = moment_linear_growth(x / r, n, t, &z, 1.0).unwrap() * r.powi(n as i32);
            assert!(close(scaled, unit, 1e-14));
        }
        let m = moment_curve(x, 3, &z, r).unwrap();
        assert!(close(m.eval(t), moment_linear_growth(x, 3, t, &z, r).unwrap(), 1e-10));
    }

    #[test]
    fn simplex_examples() {
        assert!(close(simplex_recursion(&[1.0]).unwrap(), 1.0 - (-1.0f64).exp(), 1e-15));
        assert!((simplex_recursion(&[1.0_f64, 2.0]).unwrap() - 0.1997880).abs() < 1e-6);
        assert!(close(simplex_recursion(&[2.0, 1.0]).unwrap(), simplex_recursion(&[1.0, 2.0]).unwrap(), 1e-15));
        let f = simplex_recursion(&[1.0, 1.5]).unwrap();
        let via = 8.0 * f;
        let direct = moment_linear_growth(0.0, 2, 2.0, &gc(), 1.0).unwrap();
        assert!(close(via, direct, 1e-10));
        assert!(matches!(simplex_recursion(&[1.0, 1.0 + 1e-7]), Err(Error::Ties { .. })));
        assert!(matches!(simplex_recursion(&[0.0, 1.0]), Err(Error::Ties { .. })));
        assert_eq!(simplex_recursion::<f64>(&[]).unwrap(), 1.0);
        // negative arguments are accepted: f_1(-1) = (e - 1)
        assert!(close(simplex_recursion(&[-1.0]).unwrap(), 1.0f64.exp() - 1.0, 1e-14));
    }

    #[test]
    fn increment_form_matches_sorted_form() {
        let b = [0.4, 0.3, 1.1, 0.05];
        let a: Vec<f64> = b.iter().scan(0.0, |s, &x| { *s += x; Some(*s) }).collect();
        let g = simplex_recursion_increments(&b).unwrap();
        let f = simplex_recursion(&a).unwrap();
        assert!(close(g, f, 1e-12));
        assert!(simplex_recursion_increments(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn exponential_time_examples() {
        let m1 = DeathModel::new(vec![0.5]).unwrap();
        assert!(close(moment_at_exponential_time(0.0, 1, 0.5, &m1).unwrap(), 1.0, 1e-15));
        let m2 = DeathModel::new(vec![0.5, 0.75]).unwrap();
        let v = moment_at_exponential_time(0.0, 2, 1.0, &m2).unwrap();
        assert!(close(v, (2.0 / 0.375) * (0.5 / 1.5) * (0.75 / 1.75), 1e-15));
        assert!(moment_at_exponential_time(0.0, 2, 0.0, &m2).is_err());
    }

    #[test]
    fn laplace_examples() {
        assert!(close(laplace_of_mixture(&ExpMixture::constant(1.0), 2.0).unwrap(), 0.5, 1e-15));
        let e = ExpMixture::new(vec![(1.0, 1.0)]);
        assert_eq!(laplace_of_mixture(&e, 1.0).unwrap(), 0.5);
        let z = SubordinatorSpec::pure_drift(0.5);
        let mean = transient_mean_mixture(0.0, 1.0, &z).unwrap();
        let theta = 0.5;
        assert!(close(theta * laplace_of_mixture(&mean, theta).unwrap(), 1.0, 1e-15));
        assert!(laplace_of_mixture(&e, -2.0).is_err());
    }

    #[test]
    fn mixture_merges_equal_rates() {
        let m = ExpMixture::new(vec![(1.0, 2.0), (0.5, 2.0 + 1e-14), (3.0, 0.0)]);
        assert_eq!(m.terms().len(), 2);
        assert_eq!(m.limit(), 3.0);
        assert!(close(m.eval(0.0), 4.5, 1e-15));
    }

    #[test]
    fn single_precision_moments() {
        let z = SubordinatorSpec::growth_collapse(1.0_f32, 0.5);
        let v = moment_linear_growth(0.0_f32, 2, 2.0, &z, 1.0).unwrap();
        assert!((v - 1.8273173).abs() < 1e-4);
    }
}
