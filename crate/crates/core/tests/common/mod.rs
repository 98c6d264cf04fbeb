#![allow(dead_code)]

use linsde::model::{DriverPair, JumpComponent, JumpDistribution, SubordinatorSpec};
use rand::Rng;

/// Random finite-activity `Y` jump law.
pub fn any_law<R: Rng>(rng: &mut R) -> JumpDistribution<f64> {
    match rng.random_range(0..4) {
        0 => JumpDistribution::point(rng.random_range(0.05..2.0)),
        1 => JumpDistribution::uniform(rng.random_range(0.05..2.0)),
        2 => JumpDistribution::exponential(rng.random_range(0.05..2.0)),
        _ => JumpDistribution::erlang(rng.random_range(1..4), rng.random_range(0.05..2.0)),
    }
}

/// Random `Z` jump law with support in `(0, 1]`, including the atom at 1.
pub fn collapse_law<R: Rng>(rng: &mut R) -> JumpDistribution<f64> {
    match rng.random_range(0..5) {
        0 => JumpDistribution::point(1.0),
        1 | 2 => JumpDistribution::point(rng.random_range(0.01..0.99)),
        _ => JumpDistribution::uniform(rng.random_range(0.05..1.0)),
    }
}

/// Drifts in `[0, 2]`, one to three jump components per driver.
pub fn random_pair<R: Rng>(rng: &mut R) -> DriverPair<f64> {
    let y_n = rng.random_range(1..=3);
    let z_n = rng.random_range(1..=3);
    let y = SubordinatorSpec::new(
        rng.random_range(0.0..=2.0),
        (0..y_n).map(|_| JumpComponent { rate: rng.random_range(0.1..2.0), dist: any_law(rng) }).collect(),
    );
    let z = SubordinatorSpec::new(
        rng.random_range(0.0..=2.0),
        (0..z_n).map(|_| JumpComponent { rate: rng.random_range(0.1..1.5), dist: collapse_law(rng) }).collect(),
    );
    DriverPair::new(y, z).expect("valid random pair")
}

pub fn growth_collapse() -> DriverPair<f64> {
    DriverPair::new(SubordinatorSpec::pure_drift(1.0), SubordinatorSpec::growth_collapse(1.0, 0.5)).unwrap()
}

pub fn clearing() -> DriverPair<f64> {
    DriverPair::new(SubordinatorSpec::pure_drift(1.0), SubordinatorSpec::clearing(1.0)).unwrap()
}

pub fn shot_noise() -> DriverPair<f64> {
    DriverPair::new(SubordinatorSpec::compound_exponential(1.0, 1.0), SubordinatorSpec::pure_drift(1.0)).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}
