use linsde::model::{JumpComponent, JumpDistribution, SubordinatorSpec};
use linsde::moments::{
    death_transition_row, death_transition_row_partial_fractions, laplace_of_mixture, moment_at_exponential_time,
    moment_curve, moment_linear_growth, moment_via_simplex, second_moment_mixture, simplex_recursion,
    stationary_second_moment, transient_second_moment, DeathModel, ExpMixture,
};
use linsde::quad::gauss_legendre_adaptive;
use proptest::prelude::*;

fn distinct_rates(n: usize) -> impl Strategy<Value = Vec<f64>> {
    (0.2f64..2.0, prop::collection::vec(0.2f64..1.5, n)).prop_map(|(start, gaps)| {
        let mut r = start;
        gaps.iter()
            .map(|g| {
                let v = r;
                r += g;
                v
            })
            .collect()
    })
}

fn erlang_cdf(k: usize, rate: f64, t: f64) -> f64 {
    let x = rate * t;
    let mut term = 1.0;
    let mut sum = 0.0;
    for i in 0..k {
        if i > 0 {
            term *= x / i as f64;
        }
        sum += term;
    }
    1.0 - (-x).exp() * sum
}

proptest! {
    #[test]
    fn rows_are_probability_vectors(rates in distinct_rates(6), t in 0.0f64..20.0, n in 1usize..=6) {
        let model = DeathModel::new(rates).unwrap();
        let row = death_transition_row(&model, n, t).unwrap();
        prop_assert_eq!(row.len(), n + 1);
        prop_assert!(row.iter().all(|&p| p >= -1e-15));
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniformization_matches_partial_fractions(rates in distinct_rates(5), t in 0.0f64..10.0, n in 1usize..=5) {
        let model = DeathModel::new(rates).unwrap();
        let a = death_transition_row(&model, n, t).unwrap();
        let b = death_transition_row_partial_fractions(&model, n, t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn absorption_grows_with_time(rates in distinct_rates(4), t in 0.0f64..10.0, dt in 0.0f64..2.0) {
        let model = DeathModel::new(rates).unwrap();
        let early = death_transition_row(&model, 4, t).unwrap()[0];
        let late = death_transition_row(&model, 4, t + dt).unwrap()[0];
        prop_assert!(late >= early - 1e-14);
    }

    #[test]
    fn simplex_is_symmetric(a in prop::collection::vec(0.1f64..5.0, 1..6), seed in any::<u64>()) {
        let mut args = a.clone();
        args.sort_by(f64::total_cmp);
        prop_assume!(args.windows(2).all(|w| w[1] - w[0] > 1e-3));
        let mut shuffled = a.clone();
        let k = (seed as usize) % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        let x = simplex_recursion(&a).unwrap();
        let y = simplex_recursion(&shuffled).unwrap();
        prop_assert!((x - y).abs() <= 1e-12 * x.abs());
    }

    #[test]
    fn moments_grow_in_t_from_zero(gaps in prop::collection::vec(0.05f64..0.95, 1..3), t in 0.0f64..8.0, n in 1usize..=4) {
        let mut z = SubordinatorSpec::new(0.3, vec![]);
        for q in gaps {
            z = z.with_component(0.7, JumpDistribution::point(q));
        }
        let a = moment_linear_growth(0.0, n, t, &z, 1.0).unwrap();
        let b = moment_linear_growth(0.0, n, t + 0.5, &z, 1.0).unwrap();
        prop_assert!(b >= a);
    }
}

#[test]
fn simplex_against_nested_quadrature() {
    // f_2(a, b) = ∫_0^1 ∫_0^{1-x} e^{-a x - b y} dy dx
    for &(a, b) in &[(1.0f64, 2.0f64), (0.3, 4.0), (2.5, 0.7)] {
        let inner = |x: f64| gauss_legendre_adaptive(|y: f64| (-a * x - b * y).exp(), 0.0, 1.0 - x, 1e-14);
        let quad = gauss_legendre_adaptive(inner, 0.0, 1.0, 1e-13);
        assert!((simplex_recursion(&[a, b]).unwrap() - quad).abs() < 1e-12);
    }
    let one = simplex_recursion(&[0.8]).unwrap();
    assert!((one - (1.0 - (-0.8f64).exp()) / 0.8).abs() < 1e-15);
}

#[test]
fn clearing_rows_are_poisson_and_erlang() {
    let lambda = 1.3;
    let model = DeathModel::from_z(&SubordinatorSpec::clearing(lambda), 6).unwrap();
    for &t in &[0.1, 1.0, 4.0, 15.0] {
        for n in 1..=6 {
            let row = death_transition_row(&model, n, t).unwrap();
            assert!((row[0] - erlang_cdf(n, lambda, t)).abs() < 1e-13);
            for (k, &p) in row.iter().enumerate().skip(1) {
                let j = n - k;
                let poisson = (-lambda * t).exp() * (lambda * t).powi(j as i32) / (1..=j).product::<usize>() as f64;
                assert!((p - poisson).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn laplace_of_curve_equals_exponential_time_moment() {
    let z = SubordinatorSpec::<f64>::new(0.5, vec![JumpComponent { rate: 1.0, dist: JumpDistribution::uniform(0.8) }]);
    for n in 1..=5 {
        let model = DeathModel::from_z(&z, n).unwrap();
        let curve = moment_curve(0.4, n, &z, 1.0).unwrap();
        for &theta in &[0.25, 1.0, 4.0] {
            let lhs = theta * laplace_of_mixture(&curve, theta).unwrap();
            let rhs = moment_at_exponential_time(0.4, n, theta, &model).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
            // Direct quadrature of θ ∫ e^{-θt} m(t) dt on a long interval.
            let quad = gauss_legendre_adaptive(|t: f64| theta * (-theta * t).exp() * curve.eval(t), 0.0, 400.0 / theta, 1e-12);
            assert!((quad - rhs).abs() <= 1e-8 * rhs.abs().max(1.0));
        }
    }
}

#[test]
fn simplex_route_matches_death_chain() {
    let z = SubordinatorSpec::<f64>::new(1.0, vec![JumpComponent { rate: 2.0, dist: JumpDistribution::point(0.4) }]);
    let model = DeathModel::from_z(&z, 5).unwrap();
    for &t in &[0.5, 2.0, 7.0] {
        for n in 1..=5 {
            let a = moment_via_simplex(n, t, &model).unwrap();
            let b = moment_linear_growth(0.0, n, t, &z, 1.0).unwrap();
            assert!((a - b).abs() <= 1e-9 * b, "n={n} t={t}: {a} vs {b}");
        }
    }
}

#[test]
fn second_moment_curve_and_limit() {
    let y = SubordinatorSpec::<f64>::compound_exponential(1.0, 1.0);
    let z = SubordinatorSpec::growth_collapse(1.0, 0.5);
    let curve = second_moment_mixture(&y, &z).unwrap();
    for &t in &[0.0, 0.5, 3.0] {
        assert!((curve.eval(t) - transient_second_moment(&y, &z, t).unwrap()).abs() < 1e-12);
    }
    assert!((curve.limit() - stationary_second_moment(&y, &z).unwrap()).abs() < 1e-12);
    // Two independent paths to E X^2 with linear growth: the death chain and the η-derivative formula.
    let drift = SubordinatorSpec::pure_drift(1.0);
    for &t in &[0.4, 2.0, 9.0] {
        let a = transient_second_moment(&drift, &z, t).unwrap();
        let b = moment_linear_growth(0.0, 2, t, &z, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12 * (1.0 + b));
    }
}

#[test]
fn mixtures_merge_equal_rates_and_integrate() {
    let m = ExpMixture::<f64>::new(vec![(1.0, 0.5), (2.0, 0.5), (3.0, 0.0)]);
    assert_eq!(m.terms().len(), 2);
    assert!((m.eval(2.0) - (3.0 + 3.0 * (-1.0f64).exp())).abs() < 1e-15);
    // θ L[m](θ) → m(0) as θ → ∞.
    assert!((1e8 * laplace_of_mixture(&m, 1e8).unwrap() - 6.0).abs() < 1e-6);
}

#[test]
fn f32_route_is_close_to_f64() {
    let z64 = SubordinatorSpec::growth_collapse(1.0f64, 0.5);
    let z32 = SubordinatorSpec::growth_collapse(1.0f32, 0.5);
    for n in 1..=4 {
        let a = moment_linear_growth(0.0, n, 2.0, &z64, 1.0).unwrap();
        let b = moment_linear_growth(0.0f32, n, 2.0, &z32, 1.0).unwrap() as f64;
        assert!((a - b).abs() < 1e-4 * a);
    }
}
