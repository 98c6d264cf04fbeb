//! Monte-Carlo harness.
//!
//! Replication `i` draws `Z` from stream `(seed, 4i)`, `Y` from `(seed, 4i + 1)`
//! and `X_0` from `(seed, 4i + 2)` (see [`crate::rng`]). Replications are
//! grouped into fixed blocks of [`BLOCK`]; each block is accumulated in order
//! and blocks are merged by a pairwise tree, so every statistic is a pure
//! function of `(scenario, reps, seed)` whatever the worker count.
//!
//! Estimators that only need `Z` (the conditional Laplace transform, the
//! stationary functional, `φ`) read the same `Z` stream as the full-path
//! estimators, so matched seeds give matched `Z` paths.

use std::sync::OnceLock;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{DriverPair, JumpComponent, JumpDistribution, SubordinatorSpec};
use crate::moments::{
    moment_linear_growth, transient_mean, transient_second_moment, ExpMixture, MAX_MOMENT_ORDER,
};
use crate::pathsim::{
    coarsen_increments, evolve_with_drifts, excess_density, excess_quantile, gou_discrete_from_noise,
    push_component_events, sample_driver_events, sample_renewal_collapses, Event, EventStream, GaussianZSpec, Source,
};
use crate::quad::gauss_legendre_adaptive;
use crate::rng::{replication_rng, Purpose, StreamRng};
use crate::scalar::{phi1, Scalar};

/// Replications per reduction block.
pub const BLOCK: usize = 1024;

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// One-sided 99% normal quantile.
const Z99_ONE_SIDED: f64 = 2.326_347_874_040_840_8;

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// DKW confidence level of [`stochastic_order_check`].
pub const DKW_DELTA: f64 = 0.01;

// ---------------------------------------------------------------------------
// Scenario

/// Law of `X_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialValue<T> {
    Const(T),
    Exponential { mean: T },
}

impl<T: Scalar> InitialValue<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Const(v) if v.is_finite() => Ok(()),
            Self::Exponential { mean } if mean > T::zero() && mean.is_finite() => Ok(()),
            _ => Err(Error::InvalidParameter(format!("invalid initial value {self:?}"))),
        }
    }

    pub fn mean(&self) -> T {
        match *self {
            Self::Const(v) => v,
            Self::Exponential { mean } => mean,
        }
    }

    /// `ξ_0(β) = E e^{-β X_0}`.
    pub fn lst(&self, beta: T) -> T {
        match *self {
            Self::Const(v) => (-beta * v).exp(),
            Self::Exponential { mean } => T::one() / (T::one() + beta * mean),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match *self {
            Self::Const(v) => v,
            Self::Exponential { mean } => {
                let u: f64 = rng.sample(Open01);
                -mean * T::of(u.ln())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self, Self::Const(v) if v == T::zero())
    }
}

/// How `Y` is generated. `RandomDrift` draws one drift `V` per replication
/// (replacing `y.drift`, keeping the jump components), which gives `Y`
/// stationary but dependent increments.
#[derive(Debug, Clone, PartialEq)]
pub enum YMode<T> {
    Levy,
    RandomDrift { values: Vec<T>, probs: Vec<T> },
}

/// Extra size-1 `Z` events at renewal epochs, independent of everything else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalCollapses<T> {
    pub law: JumpDistribution<T>,
    pub stationary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub pair: DriverPair<T>,
    pub x0: InitialValue<T>,
    pub horizon: T,
    pub t_grid: Vec<T>,
    pub y_mode: YMode<T>,
    pub renewal: Option<RenewalCollapses<T>>,
}

/// One simulated replication: initial value, `Y`-drift and merged events.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication<T> {
    pub x0: T,
    pub y_drift: T,
    pub events: EventStream<T>,
}

impl<T: Scalar> Scenario<T> {
    /// `X_0 = 0`, Lévy `Y`, no renewal collapses.
    pub fn new(pair: DriverPair<T>, horizon: T, t_grid: Vec<T>) -> Result<Self> {
        let scn = Self { pair, x0: InitialValue::Const(T::zero()), horizon, t_grid, y_mode: YMode::Levy, renewal: None };
        scn.validate()?;
        Ok(scn)
    }

    pub fn with_x0(mut self, x0: InitialValue<T>) -> Result<Self> {
        self.x0 = x0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_random_drift(mut self, values: Vec<T>, probs: Vec<T>) -> Result<Self> {
        self.y_mode = YMode::RandomDrift { values, probs };
        self.validate()?;
        Ok(self)
    }

    pub fn with_renewal(mut self, law: JumpDistribution<T>, stationary: bool) -> Result<Self> {
        self.renewal = Some(RenewalCollapses { law, stationary });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.pair.y.validate(crate::model::Role::Y)?;
        self.pair.z.validate(crate::model::Role::Z)?;
        self.x0.validate()?;
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon {} must be positive", self.horizon)));
        }
        if self.t_grid.iter().any(|&t| !(t >= T::zero() && t <= self.horizon)) {
            return Err(Error::InvalidParameter("t_grid must lie in [0, horizon]".into()));
        }
        if self.t_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("t_grid must be sorted".into()));
        }
        if let YMode::RandomDrift { values, probs } = &self.y_mode {
            if values.is_empty() || values.len() != probs.len() {
                return Err(Error::InvalidParameter("random drift needs matching nonempty values and probs".into()));
            }
            if values.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) || probs.iter().any(|p| !(*p >= T::zero())) {
                return Err(Error::InvalidParameter("random drift values and probs must be nonnegative".into()));
            }
            let total: T = probs.iter().copied().sum();
            if (total - T::one()).abs() > T::of(1e-9) {
                return Err(Error::InvalidParameter(format!("random drift probabilities sum to {total}, not 1")));
            }
        }
        if let Some(r) = &self.renewal {
            r.law.validate()?;
        }
        Ok(())
    }

    pub fn is_levy_y(&self) -> bool {
        matches!(self.y_mode, YMode::Levy)
    }

    pub fn is_levy_z(&self) -> bool {
        self.renewal.is_none()
    }

    /// `E Y_1`.
    pub fn ey1(&self) -> T {
        let jumps = self.pair.y.mean_rate() - self.pair.y.drift;
        match &self.y_mode {
            YMode::Levy => self.pair.y.mean_rate(),
            YMode::RandomDrift { values, probs } => {
                values.iter().zip(probs).map(|(&v, &p)| v * p).sum::<T>() + jumps
            }
        }
    }

    /// `Z` events (components and renewal collapses) of replication `rep` on `(0, horizon]`.
    pub fn z_events(&self, seed: u64, rep: u64) -> Result<EventStream<T>> {
        let mut rng = replication_rng(seed, rep, Purpose::Z);
        self.z_events_from(&mut rng)
    }

    fn z_events_from(&self, rng: &mut StreamRng) -> Result<EventStream<T>> {
        let jumps = sample_driver_events(&self.pair.z, Source::Z, self.horizon, rng)?;
        match &self.renewal {
            None => Ok(jumps),
            Some(r) => jumps.merge(sample_renewal_collapses(&r.law, self.horizon, rng, r.stationary)?),
        }
    }

    pub fn replication(&self, seed: u64, rep: u64) -> Result<Replication<T>> {
        let z = self.z_events(seed, rep)?;
        let mut rng = replication_rng(seed, rep, Purpose::Y);
        let y_drift = match &self.y_mode {
            YMode::Levy => self.pair.y.drift,
            YMode::RandomDrift { values, probs } => {
                let u: f64 = rng.sample(Open01);
                let mut acc = T::zero();
                let mut pick = *values.last().expect("nonempty");
                for (&v, &p) in values.iter().zip(probs) {
                    acc = acc + p;
                    if T::of(u) <= acc {
                        pick = v;
                        break;
                    }
                }
                pick
            }
        };
        let mut ys = Vec::new();
        push_component_events(&self.pair.y.components, Source::Y, self.horizon, &mut rng, &mut ys);
        let events = z.merge(EventStream::new(self.horizon, sort_by_time(ys))?)?;
        let x0 = self.x0.sample(&mut replication_rng(seed, rep, Purpose::Initial));
        Ok(Replication { x0, y_drift, events })
    }

    /// `X_t` of replication `rep` at each `t` in `times`.
    pub fn values_at(&self, seed: u64, rep: u64, times: &[T]) -> Result<Vec<T>> {
        let r = self.replication(seed, rep)?;
        let path = evolve_with_drifts(r.x0, r.y_drift, self.pair.z.drift, &r.events)?;
        times.iter().map(|&t| path.eval(t)).collect()
    }
}

fn sort_by_time<T: Scalar>(mut events: Vec<Event<T>>) -> Vec<Event<T>> {
    events.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite event times"));
    events
}

// ---------------------------------------------------------------------------
// Deterministic reduction

/// Streaming mean and centred second moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningStats<T> {
    pub count: u64,
    pub mean: T,
    pub m2: T,
}

impl<T: Scalar> RunningStats<T> {
    pub fn new() -> Self {
        Self { count: 0, mean: T::zero(), m2: T::zero() }
    }

    pub fn push(&mut self, x: T) {
        self.count += 1;
        let d = x - self.mean;
        self.mean = self.mean + d / T::of(self.count as f64);
        self.m2 = self.m2 + d * (x - self.mean);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let (na, nb, nf) = (T::of(self.count as f64), T::of(other.count as f64), T::of(n as f64));
        let d = other.mean - self.mean;
        Self { count: n, mean: self.mean + d * nb / nf, m2: self.m2 + other.m2 + d * d * na * nb / nf }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> T {
        if self.count < 2 {
            T::zero()
        } else {
            (self.m2 / T::of((self.count - 1) as f64)).max(T::zero())
        }
    }

    pub fn std_err(&self) -> T {
        if self.count == 0 {
            T::zero()
        } else {
            (self.variance() / T::of(self.count as f64)).sqrt()
        }
    }
}

impl<T: Scalar> Default for RunningStats<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn thread_pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let n = std::env::var("LINSDE_THREADS").ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()
    })
    .as_ref()
}

fn in_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match thread_pool() {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Runs `f(rep, out)` for every replication and reduces each of the `width`
/// outputs. The result does not depend on scheduling.
pub fn accumulate<T, F>(reps: usize, width: usize, f: F) -> Result<Vec<RunningStats<T>>>
where
    T: Scalar,
    F: Fn(u64, &mut [T]) -> Result<()> + Sync,
{
    let blocks = reps.div_ceil(BLOCK);
    let mut level: Vec<Vec<RunningStats<T>>> = in_pool(|| {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut stats = vec![RunningStats::new(); width];
                let mut buf = vec![T::zero(); width];
                for rep in b * BLOCK..((b + 1) * BLOCK).min(reps) {
                    f(rep as u64, &mut buf)?;
                    for (s, &v) in stats.iter_mut().zip(&buf) {
                        s.push(v);
                    }
                }
                Ok(stats)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => a.iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    Ok(level.pop().unwrap_or_else(|| vec![RunningStats::new(); width]))
}

/// Per-replication values in replication order.
pub fn collect_values<T, F>(reps: usize, f: F) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(u64) -> Result<T> + Sync,
{
    in_pool(|| (0..reps as u64).into_par_iter().map(&f).collect())
}

// ---------------------------------------------------------------------------
// Moments

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCell<T> {
    pub t: T,
    pub order: usize,
    pub analytic: Option<T>,
    pub mc: T,
    pub std_err: T,
    /// Half-width of the 99% normal confidence interval.
    pub half_width: T,
    pub z_score: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport<T> {
    pub t_grid: Vec<T>,
    pub n_max: usize,
    pub reps: usize,
    pub seed: u64,
    /// Time-major: all orders for `t_grid[0]`, then `t_grid[1]`, ...
    pub cells: Vec<MomentCell<T>>,
}

impl<T: Scalar> MomentReport<T> {
    pub fn cell(&self, t_index: usize, order: usize) -> &MomentCell<T> {
        &self.cells[t_index * self.n_max + order - 1]
    }
}

/// `(mc - analytic) / se`; a zero standard error gives 0 on agreement and ±∞ otherwise.
pub fn z_score<T: Scalar>(mc: T, analytic: T, std_err: T) -> T {
    let diff = mc - analytic;
    if std_err > T::zero() {
        diff / std_err
    } else if diff.abs() <= T::of(1e-12) * analytic.abs().max(T::one()) {
        T::zero()
    } else {
        T::infinity().copysign(diff)
    }
}

/// Closed-form `E X_t^n` when the scenario admits one.
pub fn analytic_moment<T: Scalar>(scn: &Scenario<T>, order: usize, t: T) -> Option<T> {
    if !scn.is_levy_z() || order == 0 || order > MAX_MOMENT_ORDER {
        return None;
    }
    let z = &scn.pair.z;
    let y = &scn.pair.y;
    if order == 1 {
        return Some(transient_mean(scn.x0.mean(), scn.ey1(), z, t));
    }
    if !scn.is_levy_y() {
        return None;
    }
    if let InitialValue::Const(x) = scn.x0 {
        if y.components.is_empty() {
            let r = y.drift;
            if z.is_zero() {
                return Some((x + r * t).powi(order as i32));
            }
            if r > T::zero() {
                return moment_linear_growth(x, order, t, z, r).ok();
            }
            let mu_n = *z.death_rates(order).ok()?.last()?;
            return Some(x.powi(order as i32) * (-mu_n * t).exp());
        }
        if order == 2 && x == T::zero() && !z.is_zero() {
            return transient_second_moment(y, z, t).ok();
        }
    }
    None
}

/// Empirical moments of orders `1..=n_max` on the scenario grid, with analytic
/// values and z-scores where available.
pub fn mc_moments<T: Scalar>(scn: &Scenario<T>, n_max: usize, reps: usize, seed: u64) -> Result<MomentReport<T>> {
    scn.validate()?;
    if reps < 100 {
        return Err(Error::InvalidParameter(format!("reps={reps} below the minimum of 100")));
    }
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let grid = &scn.t_grid;
    let stats = accumulate(reps, grid.len() * n_max, |rep, out| {
        let xs = scn.values_at(seed, rep, grid)?;
        for (i, x) in xs.into_iter().enumerate() {
            let mut p = T::one();
            for n in 0..n_max {
                p = p * x;
                out[i * n_max + n] = p;
            }
        }
        Ok(())
    })?;
    let mut cells = Vec::with_capacity(stats.len());
    for (i, &t) in grid.iter().enumerate() {
        for order in 1..=n_max {
            let s = stats[i * n_max + order - 1];
            let analytic = analytic_moment(scn, order, t);
            let se = s.std_err();
            cells.push(MomentCell {
                t,
                order,
                analytic,
                mc: s.mean,
                std_err: se,
                half_width: T::of(Z99) * se,
                z_score: analytic.map(|a| z_score(s.mean, a, se)),
            });
        }
    }
    Ok(MomentReport { t_grid: grid.clone(), n_max, reps, seed, cells })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow<T> {
    pub t: T,
    pub order: usize,
    pub analytic: T,
    pub mc: T,
    pub std_err: T,
    pub z: T,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable<T> {
    pub rows: Vec<CompareRow<T>>,
    pub above_three: usize,
    pub pass: bool,
}

/// Cell threshold on `|z|`.
pub const CELL_Z_LIMIT: f64 = 4.0;
/// At most this fraction of cells may have `|z| > 3`.
pub const FAMILY_FRACTION: f64 = 0.01;

/// Compares `curves[k]` (order `k + 1`) with the report on `grid`.
pub fn compare_report<T: Scalar>(grid: &[T], curves: &[ExpMixture<T>], report: &MomentReport<T>) -> Result<CompareTable<T>> {
    if grid != report.t_grid.as_slice() {
        return Err(Error::GridMismatch(format!(
            "comparison grid has {} points, report grid has {}",
            grid.len(),
            report.t_grid.len()
        )));
    }
    if curves.len() > report.n_max {
        return Err(Error::GridMismatch(format!(
            "{} analytic curves but the report stops at order {}",
            curves.len(),
            report.n_max
        )));
    }
    let mut rows = Vec::new();
    for (i, &t) in grid.iter().enumerate() {
        for (k, curve) in curves.iter().enumerate() {
            let cell = report.cell(i, k + 1);
            let analytic = curve.eval(t);
            let z = z_score(cell.mc, analytic, cell.std_err);
            rows.push(CompareRow {
                t,
                order: k + 1,
                analytic,
                mc: cell.mc,
                std_err: cell.std_err,
                z,
                pass: z.abs() < T::of(CELL_Z_LIMIT),
            });
        }
    }
    let above_three = rows.iter().filter(|r| !(r.z.abs() <= T::of(3.0))).count();
    let pass = rows.iter().all(|r| r.pass) && (above_three as f64) <= FAMILY_FRACTION * rows.len() as f64;
    Ok(CompareTable { rows, above_three, pass })
}

// ---------------------------------------------------------------------------
// Laplace transforms

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstEstimate<T> {
    pub value: T,
    pub std_err: T,
    /// Sample variance of the per-replication functional.
    pub variance: T,
    pub reps: usize,
}

impl<T: Scalar> LstEstimate<T> {
    fn from_stats(s: &RunningStats<T>) -> Self {
        Self { value: s.mean, std_err: s.std_err(), variance: s.variance(), reps: s.count as usize }
    }
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha >= T::zero() && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeArgument(format!("α = {alpha}")))
    }
}

fn check_time<T: Scalar>(scn: &Scenario<T>, t: T) -> Result<()> {
    if !(t >= T::zero()) {
        return Err(Error::NegativeArgument(format!("time {t}")));
    }
    if t > scn.horizon {
        return Err(Error::BeyondHorizon { t: t.as_f64(), horizon: scn.horizon.as_f64() });
    }
    Ok(())
}

/// `E e^{-α X_t}` from full paths.
pub fn plain_lst<T: Scalar>(alpha: T, t: T, scn: &Scenario<T>, reps: usize, seed: u64) -> Result<LstEstimate<T>> {
    scn.validate()?;
    check_alpha(alpha)?;
    check_time(scn, t)?;
    let stats = accumulate(reps, 1, |rep, out| {
        let x = scn.values_at(seed, rep, &[t])?[0];
        out[0] = (-alpha * x).exp();
        Ok(())
    })?;
    Ok(LstEstimate::from_stats(&stats[0]))
}

/// A crossing of `Z` seen from `J`/`N`: a log-jump `-ln(1 - q)` or a collapse to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Crossing<T> {
    Log(T),
    Kill,
}

fn crossing<T: Scalar>(q: T) -> Crossing<T> {
    if q >= T::one() {
        Crossing::Kill
    } else {
        Crossing::Log(-(-q).ln_1p())
    }
}

/// `∫_0^L η_y(β e^{-c u}) du`: drift part in closed form, jump part by quadrature.
fn eta_integral<T: Scalar>(y: &SubordinatorSpec<T>, beta: T, c: T, len: T, tol: T) -> T {
    if len <= T::zero() || beta == T::zero() {
        return T::zero();
    }
    let drift = y.drift * beta * len * phi1(c * len);
    if y.components.is_empty() {
        return drift;
    }
    let jump_part = |b: T| y.components.iter().map(|comp| comp.rate * comp.dist.laplace_complement(b)).sum::<T>();
    let jumps = if c == T::zero() {
        len * jump_part(beta)
    } else {
        gauss_legendre_adaptive(|u: T| jump_part(beta * (-c * u).exp()), T::zero(), len, tol)
    };
    drift + jumps
}

/// Walks `J` (slope `c`) forward in its own time `s`, accumulating `∫ η_y(α e^{-J_s}) 1{N_s = 0} ds`.
struct Exposure<'a, T> {
    y: &'a SubordinatorSpec<T>,
    alpha: T,
    c: T,
    tol: T,
    s: T,
    j: T,
    integral: T,
    alive: bool,
}

impl<'a, T: Scalar> Exposure<'a, T> {
    fn new(y: &'a SubordinatorSpec<T>, alpha: T, c: T, tol: T) -> Self {
        Self { y, alpha, c, tol, s: T::zero(), j: T::zero(), integral: T::zero(), alive: true }
    }

    fn advance(&mut self, to: T) {
        let len = to - self.s;
        if self.alive && len > T::zero() {
            self.integral = self.integral + eta_integral(self.y, self.alpha * (-self.j).exp(), self.c, len, self.tol);
            self.j = self.j + self.c * len;
        }
        self.s = self.s.max(to);
    }

    fn cross(&mut self, x: Crossing<T>) {
        match x {
            Crossing::Kill => self.alive = false,
            Crossing::Log(d) => self.j = self.j + d,
        }
    }

    /// `e^{-J_s} 1{N_s = 0}`.
    fn factor(&self) -> T {
        if self.alive {
            (-self.j).exp()
        } else {
            T::zero()
        }
    }
}

fn require_levy_y<T: Scalar>(scn: &Scenario<T>, what: &str) -> Result<()> {
    if scn.is_levy_y() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("{what} needs a Lévy Y")))
    }
}

/// `E[e^{-α X_t} | Z]` for one replication, walking `Z` backwards from `t`.
fn conditional_functional<T: Scalar>(alpha: T, t: T, scn: &Scenario<T>, z: &EventStream<T>, tol: T) -> T {
    let mut walk = Exposure::new(&scn.pair.y, alpha, scn.pair.z.drift, tol);
    for ev in z.events().iter().rev().filter(|e| e.source == Source::Z && e.time <= t) {
        walk.advance(t - ev.time);
        walk.cross(crossing(ev.size));
        if !walk.alive {
            break;
        }
    }
    walk.advance(t);
    scn.x0.lst(alpha * walk.factor()) * (-walk.integral).exp()
}

/// Rao–Blackwellized `E e^{-α X_t}`: simulates only `Z` and averages
/// `ξ_0(α U_{0,t}) exp(-∫_0^t η_y(α U_{u,t}) du)`.
pub fn conditional_lst<T: Scalar>(
    alpha: T,
    t: T,
    scn: &Scenario<T>,
    reps: usize,
    seed: u64,
    quad_tol: T,
) -> Result<LstEstimate<T>> {
    scn.validate()?;
    require_levy_y(scn, "conditional_lst")?;
    check_alpha(alpha)?;
    check_time(scn, t)?;
    let stats = accumulate(reps, 1, |rep, out| {
        let z = scn.z_events(seed, rep)?;
        out[0] = conditional_functional(alpha, t, scn, &z, quad_tol);
        Ok(())
    })?;
    Ok(LstEstimate::from_stats(&stats[0]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComparison<T> {
    pub plain: LstEstimate<T>,
    pub conditional: LstEstimate<T>,
    /// `Var(plain) / Var(conditional)`.
    pub ratio: T,
    /// One-sided 1% critical value of the ratio under equal variances.
    pub critical: T,
    pub pass: bool,
}

/// Plain and conditional estimators at matched seeds with a one-sided variance-ratio test.
pub fn variance_reduction<T: Scalar>(
    alpha: T,
    t: T,
    scn: &Scenario<T>,
    reps: usize,
    seed: u64,
    quad_tol: T,
) -> Result<VarianceComparison<T>> {
    let plain = plain_lst(alpha, t, scn, reps, seed)?;
    let conditional = conditional_lst(alpha, t, scn, reps, seed, quad_tol)?;
    let ratio = if conditional.variance > T::zero() {
        plain.variance / conditional.variance
    } else if plain.variance > T::zero() {
        T::infinity()
    } else {
        T::one()
    };
    // ln F is asymptotically normal with variance 2/d1 + 2/d2.
    let df = T::of((reps.max(2) - 1) as f64);
    let critical = (T::of(Z99_ONE_SIDED) * (T::of(4.0) / df).sqrt()).exp();
    Ok(VarianceComparison { plain, conditional, ratio, critical, pass: ratio > critical })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryLst<T> {
    pub estimate: LstEstimate<T>,
    /// Replications stopped at the truncation horizon instead of at a collapse to 0.
    pub truncated: bool,
    /// Mean upper bound on the truncation bias per replication.
    pub truncation_bound: T,
}

fn is_atom_at_one<T: Scalar>(c: &JumpComponent<T>) -> bool {
    matches!(c.dist, JumpDistribution::Point { x } if x >= T::one())
}

/// First collapse to 0 (atoms at 1 and renewal epochs, the latter with a
/// stationary delay) and the `Z` events before it, on `(0, min(T_1, cap)]`.
fn first_kill<T: Scalar>(scn: &Scenario<T>, cap: T, rng: &mut StreamRng) -> (Option<T>, Vec<Event<T>>) {
    let z = &scn.pair.z;
    let atom_rate: T = z.components.iter().filter(|c| is_atom_at_one(c)).map(|c| c.rate).sum();
    let mut t1: Option<T> = None;
    if atom_rate > T::zero() {
        let u: f64 = rng.sample(Open01);
        t1 = Some(-T::of(u.ln()) / atom_rate);
    }
    if let Some(r) = &scn.renewal {
        let u: f64 = rng.sample(Open01);
        let e = excess_quantile(&r.law, T::of(u));
        t1 = Some(t1.map_or(e, |a| a.min(e)));
    }
    let end = t1.unwrap_or(cap);
    let others: Vec<JumpComponent<T>> = z.components.iter().filter(|c| !is_atom_at_one(c)).copied().collect();
    let mut events = Vec::new();
    push_component_events(&others, Source::Z, end, rng, &mut events);
    (t1, sort_by_time(events))
}

/// `E exp(-∫_0^{T_1} η_y(α e^{-J_s}) ds)`, the Laplace transform of the
/// stationary law. `T_1` is the first collapse to 0; renewal collapses use the
/// stationary delay. Without collapses to 0 the integral stops at
/// `trunc_horizon` and the report carries the bias bound
/// `α η'_y(0) E e^{-J_H} / η_J(1)`.
pub fn stationary_lst_mc<T: Scalar>(
    alpha: T,
    scn: &Scenario<T>,
    reps: usize,
    seed: u64,
    trunc_horizon: T,
    quad_tol: T,
) -> Result<StationaryLst<T>> {
    scn.validate()?;
    require_levy_y(scn, "stationary_lst_mc")?;
    check_alpha(alpha)?;
    let z = &scn.pair.z;
    let has_kill = scn.renewal.is_some() || z.atom_rate_at_one() > T::zero();
    let j_rate = z.mean_rate() - z.atom_rate_at_one();
    if !has_kill && !(j_rate > T::zero()) {
        return Err(Error::ZeroSpec);
    }
    if !has_kill && !(trunc_horizon > T::zero()) {
        return Err(Error::InvalidParameter(format!("truncation horizon {trunc_horizon} must be positive")));
    }
    let ey1 = scn.pair.y.mean_rate();
    let stats = accumulate(reps, 2, |rep, out| {
        let mut rng = replication_rng(seed, rep, Purpose::Z);
        let (t1, events) = first_kill(scn, trunc_horizon, &mut rng);
        let end = t1.unwrap_or(trunc_horizon);
        let mut walk = Exposure::new(&scn.pair.y, alpha, z.drift, quad_tol);
        for ev in &events {
            walk.advance(ev.time);
            walk.cross(crossing(ev.size));
        }
        walk.advance(end);
        out[0] = (-walk.integral).exp();
        out[1] = if t1.is_none() { alpha * ey1 * walk.factor() / j_rate } else { T::zero() };
        Ok(())
    })?;
    Ok(StationaryLst { estimate: LstEstimate::from_stats(&stats[0]), truncated: !has_kill, truncation_bound: stats[1].mean })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalDelayCheck<T> {
    /// `E F(T_1)` with `T_1` drawn from the stationary-excess law.
    pub direct: LstEstimate<T>,
    /// `∫ E F(s) f_e(s) ds` from fixed-time functionals integrated against `f_e`.
    pub averaged: LstEstimate<T>,
}

impl<T: Scalar> RenewalDelayCheck<T> {
    pub fn z_score(&self) -> T {
        let se = (self.direct.std_err.powi(2) + self.averaged.std_err.powi(2)).sqrt();
        z_score(self.direct.value, self.averaged.value, se)
    }
}

fn excess_support_end<T: Scalar>(law: &JumpDistribution<T>) -> T {
    match law.support_max() {
        Some(b) => b,
        None => {
            let mut x = law.moment(1);
            while T::one() - crate::pathsim::excess_cdf(law, x) > T::of(1e-13) {
                x = x * T::of(2.0);
            }
            x
        }
    }
}

/// Checks the stationary functional with a stationary-delay renewal `N`
/// against the time average `∫_0^∞ E exp(-∫_0^s η_y(α e^{-J_u}) du) f_e(s) ds`
/// (midpoint rule with `steps` nodes, `J` simulated independently of `N`).
pub fn renewal_delay_check<T: Scalar>(
    alpha: T,
    scn: &Scenario<T>,
    reps: usize,
    seed: u64,
    steps: usize,
    quad_tol: T,
) -> Result<RenewalDelayCheck<T>> {
    let law = match &scn.renewal {
        Some(r) => r.law,
        None => return Err(Error::Unsupported("renewal_delay_check needs renewal collapses".into())),
    };
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    let direct = stationary_lst_mc(alpha, scn, reps, seed, scn.horizon, quad_tol)?.estimate;
    let end = excess_support_end(&law);
    let h = end / T::of_usize(steps);
    let nodes: Vec<T> = (0..steps).map(|k| h * (T::of_usize(k) + T::of(0.5))).collect();
    let weights: Vec<T> = nodes.iter().map(|&s| h * excess_density(&law, s)).collect();
    let z = &scn.pair.z;
    let stats = accumulate(reps, 1, |rep, out| {
        let mut rng = replication_rng(seed, rep, Purpose::Auxiliary);
        let jumps = sample_driver_events(z, Source::Z, end, &mut rng)?;
        let mut walk = Exposure::new(&scn.pair.y, alpha, z.drift, quad_tol);
        let mut evs = jumps.events().iter().peekable();
        let mut acc = T::zero();
        for (&s, &w) in nodes.iter().zip(&weights) {
            while let Some(ev) = evs.next_if(|e| e.time <= s) {
                walk.advance(ev.time);
                walk.cross(crossing(ev.size));
            }
            walk.advance(s);
            acc = acc + w * (-walk.integral).exp();
        }
        out[0] = acc;
        Ok(())
    })?;
    Ok(RenewalDelayCheck { direct, averaged: LstEstimate::from_stats(&stats[0]) })
}

// ---------------------------------------------------------------------------
// Z-only functionals

/// Estimate and 99% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub std_err: T,
    pub half_width: T,
}

impl<T: Scalar> Estimate<T> {
    fn from_stats(s: &RunningStats<T>) -> Self {
        let se = s.std_err();
        Self { value: s.mean, std_err: se, half_width: T::of(Z99) * se }
    }
}

/// `φ(s) = E e^{-J_s} 1{N_s = 0}` on `grid` from forward `Z` paths.
pub fn phi_estimate<T: Scalar>(scn: &Scenario<T>, grid: &[T], reps: usize, seed: u64) -> Result<Vec<Estimate<T>>> {
    scn.validate()?;
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::GridMismatch("φ grid must be sorted".into()));
    }
    for &s in grid {
        check_time(scn, s)?;
    }
    let stats = accumulate(reps, grid.len(), |rep, out| {
        let z = scn.z_events(seed, rep)?;
        let mut walk = Exposure::new(&scn.pair.y, T::zero(), scn.pair.z.drift, T::one());
        let mut evs = z.events().iter().peekable();
        for (slot, &s) in out.iter_mut().zip(grid) {
            while let Some(ev) = evs.next_if(|e| e.time <= s) {
                walk.advance(ev.time);
                walk.cross(crossing(ev.size));
            }
            walk.advance(s);
            *slot = walk.factor();
        }
        Ok(())
    })?;
    Ok(stats.iter().map(Estimate::from_stats).collect())
}

/// `E X_t²` for Lévy `Y` and `X_0 = 0` from `Z` alone:
/// `E[(η'_y ∫_0^t U_{u,t} du)² − η''_y ∫_0^t U_{u,t}² du]`.
pub fn second_moment_from_z<T: Scalar>(scn: &Scenario<T>, t: T, reps: usize, seed: u64) -> Result<Estimate<T>> {
    scn.validate()?;
    require_levy_y(scn, "second_moment_from_z")?;
    if !scn.x0.is_zero() {
        return Err(Error::Unsupported("second_moment_from_z needs X_0 = 0".into()));
    }
    check_time(scn, t)?;
    let d = scn.pair.y.exponent_derivatives_at_zero(2);
    let (d1, d2) = (d[0], d[1]);
    let c = scn.pair.z.drift;
    let stats = accumulate(reps, 1, |rep, out| {
        let z = scn.z_events(seed, rep)?;
        let (mut s, mut j) = (T::zero(), T::zero());
        let (mut i1, mut i2) = (T::zero(), T::zero());
        let mut segment = |s: &mut T, j: &mut T, to: T| {
            let len = to - *s;
            if len > T::zero() {
                i1 = i1 + (-*j).exp() * len * phi1(c * len);
                i2 = i2 + (-T::of(2.0) * *j).exp() * len * phi1(T::of(2.0) * c * len);
                *j = *j + c * len;
                *s = to;
            }
        };
        let mut alive = true;
        for ev in z.events().iter().rev().filter(|e| e.source == Source::Z && e.time <= t) {
            segment(&mut s, &mut j, t - ev.time);
            match crossing(ev.size) {
                Crossing::Kill => {
                    alive = false;
                    break;
                }
                Crossing::Log(dj) => j = j + dj,
            }
        }
        if alive {
            segment(&mut s, &mut j, t);
        }
        out[0] = d1 * d1 * i1 * i1 - d2 * i2;
        Ok(())
    })?;
    Ok(Estimate::from_stats(&stats[0]))
}

// ---------------------------------------------------------------------------
// Stochastic order

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderCheck<T> {
    pub pass: bool,
    /// `sup_x (F̂_{t2}(x) - F̂_{t1}(x))`.
    pub max_violation: T,
    /// DKW band half-width `sqrt(ln(2/δ) / (2 reps))`.
    pub epsilon: T,
}

/// Largest `F̂_b(x) - F̂_a(x)` over `x`, for sorted samples.
pub fn max_cdf_excess<T: Scalar>(a: &[T], b: &[T]) -> T {
    let (na, nb) = (T::of_usize(a.len()), T::of_usize(b.len()));
    let (mut i, mut k) = (0, 0);
    let mut worst = T::zero();
    while k < b.len() {
        let x = b[k];
        while k < b.len() && b[k] <= x {
            k += 1;
        }
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        worst = worst.max(T::of_usize(k) / nb - T::of_usize(i) / na);
    }
    worst
}

/// DKW test of `X_{t1} ≤_st X_{t2}` from independent samples at the two times.
pub fn stochastic_order_check<T: Scalar>(scn: &Scenario<T>, t1: T, t2: T, reps: usize, seed: u64) -> Result<OrderCheck<T>> {
    scn.validate()?;
    if !scn.x0.is_zero() {
        return Err(Error::Unsupported("stochastic_order_check needs X_0 = 0".into()));
    }
    check_time(scn, t1)?;
    check_time(scn, t2)?;
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be positive".into()));
    }
    let sample = |t: T, offset: u64| -> Result<Vec<T>> {
        let mut xs = collect_values(reps, |rep| Ok(scn.values_at(seed, offset + rep, &[t])?[0]))?;
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        Ok(xs)
    };
    let first = sample(t1, 0)?;
    let second = sample(t2, reps as u64)?;
    let max_violation = max_cdf_excess(&first, &second);
    let epsilon = T::of(((2.0 / DKW_DELTA).ln() / (2.0 * reps as f64)).sqrt());
    Ok(OrderCheck { pass: max_violation <= T::of(2.0) * epsilon, max_violation, epsilon })
}

// ---------------------------------------------------------------------------
// Discretized GOU convergence

#[derive(Debug, Clone, PartialEq)]
pub struct GouStudy<T> {
    pub fine_step: T,
    /// `(h, E max_k |X^h_{kh} - X^{fine}_{kh}|)` per coarse step.
    pub gaps: Vec<(T, Estimate<T>)>,
    /// Terminal mean of the fine-grid engine.
    pub terminal_mean: Estimate<T>,
}

impl<T: Scalar> GouStudy<T> {
    /// Successive gap ratios `gap(h) / gap(h/2)` in the order of `gaps`.
    pub fn ratios(&self) -> Vec<T> {
        self.gaps.windows(2).map(|w| w[0].1.value / w[1].1.value).collect()
    }
}

/// Pathwise error of the discretized engine at each step in `steps`
/// (power-of-two multiples of `fine_step`) against the engine at `fine_step`
/// driven by the same Brownian increments and jumps.
#[allow(clippy::too_many_arguments)]
pub fn gou_convergence<T: Scalar>(
    r: T,
    gz: &GaussianZSpec<T>,
    x0: T,
    horizon: T,
    steps: &[T],
    fine_step: T,
    reps: usize,
    seed: u64,
) -> Result<GouStudy<T>> {
    gz.validate()?;
    if !(fine_step > T::zero()) {
        return Err(Error::InvalidParameter(format!("fine step {fine_step} must be positive")));
    }
    let ratio = |a: T, b: T| -> Result<usize> {
        let q = a / b;
        let n = q.round();
        if n < T::one() || (q - n).abs() > T::of(1e-9) * q {
            return Err(Error::InvalidParameter(format!("{a} is not an integer multiple of {b}")));
        }
        Ok(n.to_usize().expect("positive ratio"))
    };
    let n_fine = ratio(horizon, fine_step)?;
    let factors: Vec<usize> = steps.iter().map(|&h| ratio(h, fine_step)).collect::<Result<_>>()?;
    let jump_spec = SubordinatorSpec::new(T::zero(), gz.jumps.clone());
    let stats = accumulate(reps, steps.len() + 1, |rep, out| {
        let mut rng = replication_rng(seed, rep, Purpose::Z);
        let sd = fine_step.sqrt();
        let fine: Vec<T> = (0..n_fine).map(|_| sd * T::of(rng.sample::<f64, _>(StandardNormal))).collect();
        let jumps = sample_driver_events(&jump_spec, Source::Z, horizon, &mut rng)?;
        let reference = gou_discrete_from_noise(r, gz.drift, gz.sigma, x0, fine_step, &fine, &jumps)?;
        for (slot, (&h, &f)) in out.iter_mut().zip(steps.iter().zip(&factors)) {
            let coarse = gou_discrete_from_noise(r, gz.drift, gz.sigma, x0, h, &coarsen_increments(&fine, f), &jumps)?;
            *slot = coarse
                .values
                .iter()
                .enumerate()
                .map(|(k, &x)| (x - reference.values[k * f]).abs())
                .fold(T::zero(), T::max);
        }
        out[steps.len()] = *reference.values.last().expect("nonempty path");
        Ok(())
    })?;
    Ok(GouStudy {
        fine_step,
        gaps: steps.iter().zip(&stats).map(|(&h, s)| (h, Estimate::from_stats(s))).collect(),
        terminal_mean: Estimate::from_stats(&stats[steps.len()]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn growth_collapse(t_grid: Vec<f64>) -> Scenario<f64> {
        let pair = DriverPair::new(SubordinatorSpec::pure_drift(1.0), SubordinatorSpec::growth_collapse(1.0, 0.5)).unwrap();
        Scenario::new(pair, 10.0, t_grid).unwrap()
    }

    fn linear_growth() -> Scenario<f64> {
        let pair = DriverPair::new(SubordinatorSpec::pure_drift(1.0), SubordinatorSpec::zero()).unwrap();
        Scenario::new(pair, 5.0, vec![0.5, 1.0, 3.0]).unwrap()
    }

    #[test]
    fn running_stats_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut all = RunningStats::new();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (RunningStats::new(), RunningStats::new());
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert_eq!(m.count, 1000);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.variance() - all.variance()).abs() < 1e-9);
    }

    #[test]
    fn accumulate_is_order_free() {
        let s = accumulate(5000, 1, |rep, out: &mut [f64]| {
            out[0] = rep as f64;
            Ok(())
        })
        .unwrap();
        assert_eq!(s[0].count, 5000);
        assert!((s[0].mean - 2499.5).abs() < 1e-9);
    }

    #[test]
    fn deterministic_growth_has_exact_moments() {
        let scn = linear_growth();
        let rep = mc_moments(&scn, 2, 200, 3).unwrap();
        for (i, &t) in scn.t_grid.iter().enumerate() {
            let c = rep.cell(i, 1);
            assert_eq!(c.mc, t);
            assert_eq!(c.std_err, 0.0);
            assert_eq!(c.z_score, Some(0.0));
            assert_eq!(rep.cell(i, 2).analytic, Some(t * t));
        }
    }

    #[test]
    fn growth_collapse_mean_gate() {
        let scn = growth_collapse(vec![0.5, 1.0, 2.0, 5.0]);
        let rep = mc_moments(&scn, 1, 20_000, 11).unwrap();
        for c in &rep.cells {
            let a = c.analytic.unwrap();
            assert!((a - 2.0 * (1.0 - (-c.t / 2.0f64).exp())).abs() < 1e-14);
            assert!(c.z_score.unwrap().abs() < 4.0, "{c:?}");
        }
    }

    #[test]
    fn random_drift_mean_uses_ey1() {
        let scn = growth_collapse(vec![1.0, 2.0]).with_random_drift(vec![0.5, 1.5], vec![0.5, 0.5]).unwrap();
        assert_eq!(scn.ey1(), 1.0);
        let rep = mc_moments(&scn, 2, 20_000, 5).unwrap();
        assert!(rep.cell(0, 2).analytic.is_none());
        for i in 0..2 {
            assert!(rep.cell(i, 1).z_score.unwrap().abs() < 4.0);
        }
        assert!(growth_collapse(vec![1.0]).with_random_drift(vec![1.0], vec![0.9]).is_err());
    }

    #[test]
    fn lst_trivial_cases() {
        let scn = growth_collapse(vec![1.0]);
        assert_eq!(plain_lst(0.0, 2.0, &scn, 500, 1).unwrap().value, 1.0);
        assert_eq!(conditional_lst(0.0, 2.0, &scn, 500, 1, 1e-10).unwrap().value, 1.0);
        let lin = linear_growth();
        let p = plain_lst(0.7, 2.0, &lin, 300, 1).unwrap();
        assert!((p.value - (-1.4f64).exp()).abs() < 1e-15);
        assert_eq!(p.variance, 0.0);
        let c = conditional_lst(0.7, 2.0, &lin, 300, 1, 1e-10).unwrap();
        assert!((c.value - (-1.4f64).exp()).abs() < 1e-15);
        assert!(plain_lst(-1.0, 1.0, &scn, 10, 1).is_err());
        assert!(plain_lst(1.0, 11.0, &scn, 10, 1).is_err());
    }

    #[test]
    fn conditional_lst_with_z_zero_and_jumps() {
        let y = SubordinatorSpec::<f64>::compound_exponential(2.0, 0.5).with_component(1.0, JumpDistribution::uniform(1.0));
        let pair = DriverPair::new(y.clone(), SubordinatorSpec::zero()).unwrap();
        let scn = Scenario::new(pair, 3.0, vec![]).unwrap().with_x0(InitialValue::Exponential { mean: 2.0 }).unwrap();
        let c = conditional_lst(0.8, 1.5, &scn, 200, 2, 1e-12).unwrap();
        let expected = 1.0 / (1.0 + 0.8 * 2.0) * (-y.exponent(0.8).unwrap() * 1.5).exp();
        assert!((c.value - expected).abs() < 1e-14);
        assert_eq!(c.variance, 0.0);
    }

    #[test]
    fn conditional_functional_matches_hand_computation() {
        // Z: drift 1, single event q=0.5 at time 1. Y: drift 1, x0 = 0, t = 2.
        // U_{u,2} = e^{-(2-u)} for u >= 1, e^{-(2-u)}/2 for u < 1.
        let pair = DriverPair::new(SubordinatorSpec::pure_drift(1.0), SubordinatorSpec::pure_drift(1.0)).unwrap();
        let scn = Scenario::new(pair, 2.0, vec![]).unwrap();
        let z = EventStream::new(2.0, vec![Event::z(1.0, 0.5)]).unwrap();
        let a = 0.9;
        let e = |x: f64| (-x).exp();
        let integral = (1.0 - e(1.0)) + 0.5 * (e(1.0) - e(2.0));
        let got = conditional_functional(a, 2.0, &scn, &z, 1e-12);
        assert!((got - e(a * integral)).abs() < 1e-15);
    }

    #[test]
    fn plain_and_conditional_agree() {
        let pair = DriverPair::<f64>::new(SubordinatorSpec::compound_exponential(1.0, 1.0), SubordinatorSpec::growth_collapse(1.0, 0.5)).unwrap();
        let scn = Scenario::new(pair, 10.0, vec![]).unwrap();
        let p = plain_lst(1.0, 2.0, &scn, 20_000, 9).unwrap();
        let c = conditional_lst(1.0, 2.0, &scn, 20_000, 9, 1e-10).unwrap();
        let z = (p.value - c.value) / (p.std_err.powi(2) + c.std_err.powi(2)).sqrt();
        assert!(z.abs() < 4.0, "{p:?} {c:?}");
        assert!(c.variance < 0.5 * p.variance);
    }

    #[test]
    fn conditioning_is_void_for_deterministic_input() {
        // With Y = r t and X_0 = 0, e^{-αX_t} is already a function of Z.
        let scn = growth_collapse(vec![]);
        let p = plain_lst(1.0, 2.0, &scn, 3000, 9).unwrap();
        let c = conditional_lst(1.0, 2.0, &scn, 3000, 9, 1e-10).unwrap();
        assert!((p.value - c.value).abs() < 1e-14);
        assert!((p.variance - c.variance).abs() < 1e-12 * p.variance);
    }

    #[test]
    fn stationary_clearing_small_alpha() {
        let pair = DriverPair::new(SubordinatorSpec::pure_drift(1.0), SubordinatorSpec::clearing(1.0)).unwrap();
        let scn = Scenario::new(pair, 10.0, vec![]).unwrap();
        let s = stationary_lst_mc(0.0, &scn, 100, 1, 10.0, 1e-10).unwrap();
        assert_eq!(s.estimate.value, 1.0);
        assert!(!s.truncated);
        // Stationary law is exp(1): E e^{-αX} = 1/(1+α).
        let a = 0.5f64;
        let s = stationary_lst_mc(a, &scn, 20_000, 4, 10.0, 1e-10).unwrap();
        assert!(((s.estimate.value - 1.0 / (1.0 + a)) / s.estimate.std_err).abs() < 4.0);
    }

    #[test]
    fn stationary_growth_collapse_is_truncated() {
        let scn = growth_collapse(vec![]);
        let s = stationary_lst_mc(0.2, &scn, 2000, 4, 40.0, 1e-10).unwrap();
        assert!(s.truncated);
        assert!(s.truncation_bound > 0.0 && s.truncation_bound < 1e-6);
        let zero = Scenario::new(DriverPair::new(SubordinatorSpec::pure_drift(1.0), SubordinatorSpec::zero()).unwrap(), 1.0, vec![]).unwrap();
        assert_eq!(stationary_lst_mc(0.2, &zero, 10, 1, 1.0, 1e-10).unwrap_err(), Error::ZeroSpec);
    }

    #[test]
    fn phi_for_levy_z_is_exponential() {
        let scn = growth_collapse(vec![]);
        let grid = vec![0.0, 1.0, 3.0];
        let phi = phi_estimate(&scn, &grid, 20_000, 2).unwrap();
        assert_eq!(phi[0].value, 1.0);
        for (e, &s) in phi.iter().zip(&grid).skip(1) {
            assert!(((e.value - (-0.5 * s).exp()) / e.std_err).abs() < 4.0);
        }
    }

    #[test]
    fn second_moment_from_z_shot_noise() {
        let pair = DriverPair::new(SubordinatorSpec::compound_exponential(1.0, 1.0), SubordinatorSpec::pure_drift(1.0)).unwrap();
        let scn = Scenario::new(pair, 2.0, vec![]).unwrap();
        let e = second_moment_from_z(&scn, 1.0, 200, 1).unwrap();
        // Z deterministic: the estimator is exact.
        assert!((e.value - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        assert_eq!(e.std_err, 0.0);
    }

    #[test]
    fn cdf_excess() {
        assert_eq!(max_cdf_excess(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(max_cdf_excess(&[2.0, 3.0], &[0.0, 1.0]), 1.0);
        assert_eq!(max_cdf_excess(&[0.0, 1.0], &[2.0, 3.0]), 0.0);
        assert_eq!(max_cdf_excess(&[0.0, 3.0], &[1.0, 2.0]), 0.5);
    }

    #[test]
    fn order_check_requires_zero_start() {
        let scn = growth_collapse(vec![]).with_x0(InitialValue::Const(1.0)).unwrap();
        assert!(stochastic_order_check(&scn, 0.5, 1.0, 100, 0).is_err());
        let scn = growth_collapse(vec![]);
        assert!(stochastic_order_check(&scn, 1.0, 1.0, 2000, 0).unwrap().pass);
    }

    #[test]
    fn compare_report_flags_corruption() {
        let scn = growth_collapse(vec![1.0, 2.0]);
        let mut rep = mc_moments(&scn, 1, 200, 1).unwrap();
        let curve = ExpMixture::new(rep.cells.iter().map(|_| (0.0, 0.0)).collect());
        assert!(compare_report(&[1.0], &[curve], &rep).is_err());
        for c in rep.cells.iter_mut() {
            c.mc = 2.0 * (1.0 - (-c.t / 2.0f64).exp());
            c.std_err = 0.01;
        }
        let curve = crate::moments::transient_mean_mixture(0.0, 1.0, &scn.pair.z).unwrap();
        let table = compare_report(&[1.0, 2.0], std::slice::from_ref(&curve), &rep).unwrap();
        assert!(table.pass);
        rep.cells[1].mc += 0.1;
        let table = compare_report(&[1.0, 2.0], &[curve], &rep).unwrap();
        assert!(!table.pass && table.rows[0].pass && !table.rows[1].pass);
    }
}
