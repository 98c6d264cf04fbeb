//! Exact event-driven paths of `X_t = X_0 + Y_t - ∫_{(0,t]} X_{s-} dZ_s`.
//!
//! Between events `X` follows the linear ODE `dX = (r - c X) dt`, which has a
//! closed-form flow, so a [`Path`] is exact at every time. At a `Z`-jump of size
//! `q` the value is multiplied by `1 - q`; at a `Y`-jump of size `j` it is
//! shifted by `j`. When both happen at the same instant the collapse acts on the
//! left limit first: `X_t = X_{t-} (1 - ΔZ_t) + ΔY_t`.
//!
//! [`representation_eval`] computes the same value by the explicit solution
//! `X_t = x0 U_{0,t} + ∫_{[0,t]} U_{u,t} dY_u` with
//! `U_{u,t} = e^{-c(t-u)} ∏_{u<s≤t} (1 - ΔZ_s)`, and
//! [`residual_check`] verifies the integral equation itself along a path.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{DriverPair, JumpComponent, JumpDistribution, SubordinatorSpec};
use crate::scalar::{phi1, phi2, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Y,
    Z,
}

impl Source {
    pub fn label(self) -> &'static str {
        match self {
            Source::Y => "Y",
            Source::Z => "Z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<T> {
    pub time: T,
    pub source: Source,
    pub size: T,
}

impl<T: Scalar> Event<T> {
    pub fn y(time: T, size: T) -> Self {
        Self { time, source: Source::Y, size }
    }

    pub fn z(time: T, size: T) -> Self {
        Self { time, source: Source::Z, size }
    }
}

/// Time-sorted jumps of `Y` and `Z` over `(0, horizon]`.
///
/// Simulated streams have strictly increasing times. Hand-built streams may
/// contain a `Y` and a `Z` event at the same instant.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream<T> {
    horizon: T,
    events: Vec<Event<T>>,
}

impl<T: Scalar> EventStream<T> {
    /// Validates a time-sorted stream. Simultaneous events are reordered so
    /// that collapses come before additions.
    pub fn new(horizon: T, mut events: Vec<Event<T>>) -> Result<Self> {
        if !(horizon > T::zero() && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
        }
        for (i, e) in events.iter().enumerate() {
            if !(e.time > T::zero() && e.time <= horizon) {
                return Err(Error::EventOutsideHorizon { time: e.time.as_f64(), horizon: horizon.as_f64() });
            }
            if i > 0 && e.time < events[i - 1].time {
                return Err(Error::UnsortedEvents(i));
            }
            if !(e.size > T::zero() && e.size.is_finite()) {
                return Err(Error::InvalidParameter(format!("event {i} has nonpositive size {}", e.size)));
            }
            if e.source == Source::Z && e.size > T::one() {
                return Err(Error::InvalidParameter(format!("Z event {i} has size {} > 1", e.size)));
            }
        }
        sort_events(&mut events);
        Ok(Self { horizon, events })
    }

    pub fn empty(horizon: T) -> Result<Self> {
        Self::new(horizon, Vec::new())
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn events(&self) -> &[Event<T>] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn z_events(&self) -> impl Iterator<Item = &Event<T>> {
        self.events.iter().filter(|e| e.source == Source::Z)
    }

    pub fn y_events(&self) -> impl Iterator<Item = &Event<T>> {
        self.events.iter().filter(|e| e.source == Source::Y)
    }

    /// Merges two streams over the same horizon.
    pub fn merge(self, other: Self) -> Result<Self> {
        if self.horizon != other.horizon {
            return Err(Error::Mismatch("cannot merge streams with different horizons".into()));
        }
        let mut events = self.events;
        events.extend(other.events);
        sort_events(&mut events);
        Self::new(self.horizon, events)
    }
}

fn sort_events<T: Scalar>(events: &mut [Event<T>]) {
    // Z before Y at equal times; only matters for hand-built simultaneous pairs.
    events.sort_by(|a, b| {
        a.time
            .partial_cmp(&b.time)
            .expect("finite event times")
            .then_with(|| (a.source == Source::Y).cmp(&(b.source == Source::Y)))
    });
}

fn has_ties<T: Scalar>(events: &[Event<T>]) -> bool {
    events.windows(2).any(|w| w[0].time == w[1].time)
}

fn exp_draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln()
}

/// Appends the Poisson jumps of `components` on `(0, horizon]`.
pub fn push_component_events<T: Scalar, R: Rng + ?Sized>(
    components: &[JumpComponent<T>],
    source: Source,
    horizon: T,
    rng: &mut R,
    out: &mut Vec<Event<T>>,
) {
    for comp in components {
        let mut t = T::zero();
        loop {
            t = t + T::of(exp_draw(rng)) / comp.rate;
            if t > horizon {
                break;
            }
            let size = comp.dist.sample(rng);
            out.push(Event { time: t, source, size });
        }
    }
}

/// Simulates the jumps of one driver. Ties are redrawn.
pub fn sample_driver_events<T: Scalar, R: Rng + ?Sized>(
    spec: &SubordinatorSpec<T>,
    source: Source,
    horizon: T,
    rng: &mut R,
) -> Result<EventStream<T>> {
    loop {
        let mut events = Vec::new();
        push_component_events(&spec.components, source, horizon, rng, &mut events);
        sort_events(&mut events);
        if !has_ties(&events) {
            return EventStream::new(horizon, events);
        }
    }
}

/// Simulates the superposed jumps of `Y` and `Z` over `(0, horizon]`.
pub fn sample_events<T: Scalar, R: Rng + ?Sized>(
    pair: &DriverPair<T>,
    horizon: T,
    rng: &mut R,
) -> Result<EventStream<T>> {
    if !(horizon > T::zero()) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    loop {
        let mut events = Vec::new();
        push_component_events(&pair.y.components, Source::Y, horizon, rng, &mut events);
        push_component_events(&pair.z.components, Source::Z, horizon, rng, &mut events);
        sort_events(&mut events);
        if !has_ties(&events) {
            return EventStream::new(horizon, events);
        }
    }
}

/// CDF of the stationary-excess law of a renewal inter-arrival distribution.
pub fn excess_cdf<T: Scalar>(law: &JumpDistribution<T>, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    match *law {
        JumpDistribution::Point { x: d } => (x / d).min(T::one()),
        JumpDistribution::Uniform { b } => {
            if x >= b {
                T::one()
            } else {
                let s = x / b;
                T::of(2.0) * s - s * s
            }
        }
        JumpDistribution::Exponential { mean } => -(-x / mean).exp_m1(),
        JumpDistribution::Erlang { k, mean } => {
            // 1 - e^{-βx}/k Σ_{i<k} (k - i) (βx)^i / i!
            let beta = T::of(k as f64) / mean;
            let bx = beta * x;
            let mut term = T::one();
            let mut acc = T::zero();
            for i in 0..k {
                if i > 0 {
                    term = term * bx / T::of(i as f64);
                }
                acc = acc + T::of((k - i) as f64) * term;
            }
            T::one() - (-bx).exp() * acc / T::of(k as f64)
        }
    }
}

/// Density `(1 - F(x)) / mean` of the stationary-excess law.
pub fn excess_density<T: Scalar>(law: &JumpDistribution<T>, x: T) -> T {
    match *law {
        JumpDistribution::Point { x: d } => {
            if x < d {
                T::one() / d
            } else {
                T::zero()
            }
        }
        JumpDistribution::Uniform { b } => {
            if x < b {
                T::of(2.0) * (T::one() - x / b) / b
            } else {
                T::zero()
            }
        }
        JumpDistribution::Exponential { mean } => (-x / mean).exp() / mean,
        JumpDistribution::Erlang { k, mean } => {
            let beta = T::of(k as f64) / mean;
            let bx = beta * x;
            let mut term = T::one();
            let mut acc = T::one();
            for i in 1..k {
                term = term * bx / T::of(i as f64);
                acc = acc + term;
            }
            (-bx).exp() * acc / mean
        }
    }
}

/// Inverse of [`excess_cdf`]: closed form where available, safeguarded Newton otherwise.
pub fn excess_quantile<T: Scalar>(law: &JumpDistribution<T>, u: T) -> T {
    match *law {
        JumpDistribution::Point { x: d } => u * d,
        JumpDistribution::Uniform { b } => b * (T::one() - (T::one() - u).sqrt()),
        JumpDistribution::Exponential { mean } => -mean * (-u).ln_1p(),
        JumpDistribution::Erlang { mean, .. } => {
            let tol = T::of(1e-12).max(T::epsilon() * T::of(4.0));
            let mut lo = T::zero();
            let mut hi = mean;
            while excess_cdf(law, hi) < u {
                lo = hi;
                hi = hi * T::of(2.0);
            }
            let mut x = (lo + hi) / T::of(2.0);
            for _ in 0..200 {
                let f = excess_cdf(law, x) - u;
                if f.abs() <= tol {
                    break;
                }
                if f > T::zero() {
                    hi = x;
                } else {
                    lo = x;
                }
                let d = excess_density(law, x);
                let newton = x - f / d;
                x = if d > T::zero() && newton > lo && newton < hi { newton } else { (lo + hi) / T::of(2.0) };
            }
            x
        }
    }
}

/// Size-1 `Z` events at the epochs of a renewal process with the given
/// inter-renewal law. With `stationary` the first epoch follows the
/// stationary-excess law, which makes the counting process time-stationary.
pub fn sample_renewal_collapses<T: Scalar, R: Rng + ?Sized>(
    inter_renewal: &JumpDistribution<T>,
    horizon: T,
    rng: &mut R,
    stationary: bool,
) -> Result<EventStream<T>> {
    inter_renewal.validate()?;
    if !(horizon > T::zero()) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    let mut events = Vec::new();
    let mut t = if stationary {
        let u: f64 = rng.sample(Open01);
        excess_quantile(inter_renewal, T::of(u))
    } else {
        inter_renewal.sample(rng)
    };
    while t <= horizon {
        events.push(Event::z(t, T::one()));
        t = t + inter_renewal.sample(rng);
    }
    EventStream::new(horizon, events)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub start: T,
    pub value: T,
}

/// Piecewise-exact path of `X`: each segment starts at an event time with the
/// post-jump value and then follows the ODE flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T> {
    x0: T,
    y_drift: T,
    z_drift: T,
    horizon: T,
    segments: Vec<Segment<T>>,
}

/// `v e^{-c dt} + r dt φ1(c dt)`: the ODE flow over `dt`.
#[inline]
pub fn flow<T: Scalar>(v: T, r: T, c: T, dt: T) -> T {
    let x = c * dt;
    v * (-x).exp() + r * dt * phi1(x)
}

/// `∫_0^L` of the flow started at `v`.
#[inline]
fn flow_integral<T: Scalar>(v: T, r: T, c: T, len: T) -> T {
    let x = c * len;
    v * len * phi1(x) + r * len * len * phi2(x)
}

impl<T: Scalar> Path<T> {
    pub fn x0(&self) -> T {
        self.x0
    }

    pub fn y_drift(&self) -> T {
        self.y_drift
    }

    pub fn z_drift(&self) -> T {
        self.z_drift
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    fn check_time(&self, t: T) -> Result<()> {
        if !(t >= T::zero()) {
            return Err(Error::NegativeArgument(format!("time {t}")));
        }
        if t > self.horizon {
            return Err(Error::BeyondHorizon { t: t.as_f64(), horizon: self.horizon.as_f64() });
        }
        Ok(())
    }

    /// `X_t` (right-continuous).
    pub fn eval(&self, t: T) -> Result<T> {
        self.check_time(t)?;
        let idx = self.segments.partition_point(|s| s.start <= t) - 1;
        let s = self.segments[idx];
        Ok(flow(s.value, self.y_drift, self.z_drift, t - s.start))
    }

    /// `X_{t-}`; equals `X_0` at `t = 0`.
    pub fn eval_left(&self, t: T) -> Result<T> {
        self.check_time(t)?;
        if t == T::zero() {
            return Ok(self.x0);
        }
        let idx = self.segments.partition_point(|s| s.start < t) - 1;
        let s = self.segments[idx];
        Ok(flow(s.value, self.y_drift, self.z_drift, t - s.start))
    }
}

/// Evolves `X` exactly through `events` using the drifts of `pair`.
pub fn evolve<T: Scalar>(x0: T, pair: &DriverPair<T>, events: &EventStream<T>) -> Result<Path<T>> {
    evolve_with_drifts(x0, pair.y.drift, pair.z.drift, events)
}

/// [`evolve`] with explicit `Y`-drift `r` and `Z`-drift `c`.
pub fn evolve_with_drifts<T: Scalar>(x0: T, r: T, c: T, events: &EventStream<T>) -> Result<Path<T>> {
    let mut segments = Vec::with_capacity(events.len() + 1);
    segments.push(Segment { start: T::zero(), value: x0 });
    let evs = events.events();
    let mut i = 0;
    while i < evs.len() {
        let time = evs[i].time;
        let last = *segments.last().expect("nonempty");
        let mut v = flow(last.value, r, c, time - last.start);
        let mut add = T::zero();
        while i < evs.len() && evs[i].time == time {
            match evs[i].source {
                Source::Z => v = v * (T::one() - evs[i].size),
                Source::Y => add = add + evs[i].size,
            }
            i += 1;
        }
        segments.push(Segment { start: time, value: v + add });
    }
    Ok(Path { x0, y_drift: r, z_drift: c, horizon: events.horizon(), segments })
}

/// `U_{u,t} = e^{-c(t-u)} ∏_{u<s≤t} (1 - ΔZ_s)`.
pub fn u_factor<T: Scalar>(events: &EventStream<T>, c: T, u: T, t: T) -> Result<T> {
    if u > t {
        return Err(Error::ReversedInterval { u: u.as_f64(), t: t.as_f64() });
    }
    if u < T::zero() || t > events.horizon() {
        return Err(Error::BeyondHorizon { t: t.as_f64(), horizon: events.horizon().as_f64() });
    }
    if u == t {
        return Ok(T::one());
    }
    let product = events
        .z_events()
        .filter(|e| e.time > u && e.time <= t)
        .fold(T::one(), |acc, e| acc * (T::one() - e.size));
    Ok((-c * (t - u)).exp() * product)
}

/// `X_t` from the explicit representation, independently of [`evolve`].
pub fn representation_eval<T: Scalar>(x0: T, pair: &DriverPair<T>, events: &EventStream<T>, t: T) -> Result<T> {
    representation_with_drifts(x0, pair.y.drift, pair.z.drift, events, t)
}

/// [`representation_eval`] with explicit drifts.
pub fn representation_with_drifts<T: Scalar>(x0: T, r: T, c: T, events: &EventStream<T>, t: T) -> Result<T> {
    if t > events.horizon() {
        return Err(Error::BeyondHorizon { t: t.as_f64(), horizon: events.horizon().as_f64() });
    }
    if t < T::zero() {
        return Err(Error::NegativeArgument(format!("time {t}")));
    }
    let z: Vec<(T, T)> = events.z_events().filter(|e| e.time <= t).map(|e| (e.time, e.size)).collect();
    let m = z.len();
    // suffix[j] = ∏_{i >= j} (1 - q_i)
    let mut suffix = vec![T::one(); m + 1];
    for j in (0..m).rev() {
        suffix[j] = suffix[j + 1] * (T::one() - z[j].1);
    }
    let trailing = |u: T| suffix[z.partition_point(|&(s, _)| s <= u)];
    let decay = |u: T| (-c * (t - u)).exp();

    let mut x = x0 * decay(T::zero()) * suffix[0];
    for e in events.y_events().filter(|e| e.time <= t) {
        x = x + e.size * decay(e.time) * trailing(e.time);
    }
    if r != T::zero() {
        let mut lo = T::zero();
        for j in 0..=m {
            let hi = if j < m { z[j].0 } else { t };
            let len = hi - lo;
            if len > T::zero() {
                x = x + r * suffix[j] * decay(hi) * len * phi1(c * len);
            }
            lo = hi;
        }
    }
    Ok(x)
}

/// Largest violation of `X_t = x0 + Y_t - ∫_{(0,t]} X_{s-} dZ_s` over the
/// event times and a 100-point grid, with the drift part of the integral in
/// closed form per segment.
pub fn residual_check<T: Scalar>(path: &Path<T>, events: &EventStream<T>, pair: &DriverPair<T>) -> Result<T> {
    residual_check_with_drifts(path, events, pair.y.drift, pair.z.drift)
}

pub fn residual_check_with_drifts<T: Scalar>(path: &Path<T>, events: &EventStream<T>, r: T, c: T) -> Result<T> {
    if path.y_drift != r || path.z_drift != c || path.horizon != events.horizon() {
        return Err(Error::Mismatch("path drifts or horizon differ from the inputs".into()));
    }
    let segs = path.segments();
    // cumulative Y and ∫X dZ at the start of each segment (after its jumps)
    let mut cum_y = vec![T::zero(); segs.len()];
    let mut cum_i = vec![T::zero(); segs.len()];
    let evs = events.events();
    let mut i = 0;
    for k in 1..segs.len() {
        let prev = segs[k - 1];
        let start = segs[k].start;
        if i >= evs.len() || evs[i].time != start {
            return Err(Error::Mismatch(format!("segment {k} does not start at an event time")));
        }
        let len = start - prev.start;
        let left = flow(prev.value, r, c, len);
        let mut y = cum_y[k - 1] + r * len;
        let mut integral = cum_i[k - 1] + c * flow_integral(prev.value, r, c, len);
        while i < evs.len() && evs[i].time == start {
            match evs[i].source {
                Source::Y => y = y + evs[i].size,
                Source::Z => integral = integral + left * evs[i].size,
            }
            i += 1;
        }
        cum_y[k] = y;
        cum_i[k] = integral;
    }
    if i != evs.len() {
        return Err(Error::Mismatch("events left over after the last segment".into()));
    }

    let horizon = path.horizon();
    let grid = (0..100).map(|j| horizon * T::of_usize(j) / T::of(99.0));
    let times: Vec<T> = segs.iter().skip(1).map(|s| s.start).chain(grid).collect();
    let mut worst = T::zero();
    for t in times {
        let k = segs.partition_point(|s| s.start <= t) - 1;
        let s = segs[k];
        let dt = t - s.start;
        let x = flow(s.value, r, c, dt);
        let y = cum_y[k] + r * dt;
        let integral = cum_i[k] + c * flow_integral(s.value, r, c, dt);
        let res = (x - path.x0 - y + integral).abs();
        if res > worst || res.is_nan() {
            worst = res;
        }
    }
    Ok(worst)
}

/// `Z` with a Brownian part: `Z_t = a t + σ W_t + Σ jumps` in the collapse
/// convention (each jump `q` multiplies `X` by `1 - q`).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianZSpec<T> {
    pub drift: T,
    pub sigma: T,
    pub jumps: Vec<JumpComponent<T>>,
}

impl<T: Scalar> GaussianZSpec<T> {
    pub fn new(drift: T, sigma: T) -> Result<Self> {
        let spec = Self { drift, sigma, jumps: Vec::new() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= T::zero()) || !self.drift.is_finite() {
            return Err(Error::InvalidParameter(format!("need σ >= 0 and finite drift, got σ={}", self.sigma)));
        }
        SubordinatorSpec::new(T::zero(), self.jumps.clone()).validate(crate::model::Role::Z)
    }
}

/// Grid path produced by the discretized engine.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath<T> {
    pub step: T,
    pub values: Vec<T>,
}

impl<T: Scalar> DiscretePath<T> {
    pub fn time(&self, k: usize) -> T {
        self.step * T::of_usize(k)
    }
}

fn step_count<T: Scalar>(h: T, horizon: T) -> Result<usize> {
    if !(h > T::zero()) {
        return Err(Error::InvalidParameter(format!("step h={h} must be positive")));
    }
    let ratio = horizon / h;
    let n = ratio.round();
    if (ratio - n).abs() > T::of(1e-9) * ratio.max(T::one()) || n < T::one() {
        return Err(Error::InvalidParameter(format!("horizon {horizon} is not a multiple of h={h}")));
    }
    Ok(n.to_usize().expect("step count"))
}

/// Discretized engine on the grid `k h`: `X_{k+1} = U_k (X_k + r h)` with
/// `U_k = exp(-a h + σ ΔW_k - σ² h / 2) ∏ (1 - q)` over the `Z`-jumps in the step.
/// The `dY` integral uses the left endpoint of each step.
pub fn simulate_gou_discrete<T: Scalar, R: Rng + ?Sized>(
    r: T,
    gz: &GaussianZSpec<T>,
    x0: T,
    h: T,
    horizon: T,
    rng: &mut R,
) -> Result<DiscretePath<T>> {
    gz.validate()?;
    let n = step_count(h, horizon)?;
    let sd = h.sqrt();
    let increments: Vec<T> = (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            sd * T::of(g)
        })
        .collect();
    let jumps = sample_driver_events(&SubordinatorSpec::new(T::zero(), gz.jumps.clone()), Source::Z, horizon, rng)?;
    gou_discrete_from_noise(r, gz.drift, gz.sigma, x0, h, &increments, &jumps)
}

/// The discretized engine driven by given Brownian increments and `Z`-jumps.
pub fn gou_discrete_from_noise<T: Scalar>(
    r: T,
    a: T,
    sigma: T,
    x0: T,
    h: T,
    brownian_increments: &[T],
    z_jumps: &EventStream<T>,
) -> Result<DiscretePath<T>> {
    if !(h > T::zero()) {
        return Err(Error::InvalidParameter(format!("step h={h} must be positive")));
    }
    let n = brownian_increments.len();
    let ito = sigma * sigma * h / T::of(2.0);
    let jumps: Vec<&Event<T>> = z_jumps.z_events().collect();
    let mut j = 0;
    let mut values = Vec::with_capacity(n + 1);
    let mut x = x0;
    values.push(x);
    for (k, dw) in brownian_increments.iter().enumerate() {
        let end = h * T::of_usize(k + 1);
        let mut u = (-a * h + sigma * *dw - ito).exp();
        while j < jumps.len() && jumps[j].time <= end {
            u = u * (T::one() - jumps[j].size);
            j += 1;
        }
        x = u * (x + r * h);
        values.push(x);
    }
    Ok(DiscretePath { step: h, values })
}

/// Sums consecutive blocks of `factor` increments (coarser grid, same path).
pub fn coarsen_increments<T: Scalar>(fine: &[T], factor: usize) -> Vec<T> {
    fine.chunks(factor).map(|c| c.iter().copied().sum()).collect()
}
