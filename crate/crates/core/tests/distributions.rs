use std::collections::BTreeMap;

use proptest::prelude::*;
use selfnorm::distributions::{
    sample_iid, sample_iid_parallel, slow_variation_diagnostic, truncated_second_moment, DistributionError,
    EmpiricalMoment,
};
use selfnorm::{DistributionSpec, Law, MomentMethod, SecondMoment, Transform};

/// Composite Simpson rule with `2m` panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / (2 * m) as f64;
    let mut s = f(a) + f(b);
    for i in 1..2 * m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn normal_l_quadrature(x: f64) -> f64 {
    let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    2.0 * simpson(|t| t * t * density(t), 0.0, x, 20_000)
}

fn analytic(dist: &DistributionSpec, g: Transform) -> SecondMoment {
    SecondMoment::resolve(dist, &g, MomentMethod::Analytic).unwrap()
}

#[test]
fn rademacher_samples_are_signs() {
    let xs = sample_iid(&DistributionSpec::rademacher(), 4, 7).unwrap();
    assert_eq!(xs.len(), 4);
    assert!(xs.iter().all(|&x| x == 1.0 || x == -1.0));
}

#[test]
fn normal_mean_in_clt_band() {
    let xs = sample_iid(&DistributionSpec::standard_normal(), 1_000_000, 1).unwrap();
    let mean = xs.iter().sum::<f64>() / 1e6;
    assert!(mean.abs() < 4.0 / 1e3, "mean {mean}");
    let var = xs.iter().map(|x| x * x).sum::<f64>() / 1e6;
    assert!((var - 1.0).abs() < 4.0 * 2f64.sqrt() / 1e3, "var {var}");
}

#[test]
fn square_tail_exceedance_fraction() {
    let xs = sample_iid(&DistributionSpec::square_tail(), 1_000_000, 1).unwrap();
    assert!(xs.iter().all(|x| x.abs() >= 1.0));
    let frac = xs.iter().filter(|x| x.abs() > 10.0).count() as f64 / 1e6;
    let se = (0.01f64 * 0.99 / 1e6).sqrt();
    assert!((frac - 0.01).abs() <= 3.0 * se, "fraction {frac}");
}

#[test]
fn sampling_is_worker_count_invariant() {
    let d = DistributionSpec::standard_normal();
    let serial = sample_iid(&d, 100_000, 9).unwrap();
    for workers in [1, 4, 16] {
        assert_eq!(sample_iid_parallel(&d, 100_000, 9, workers).unwrap(), serial);
    }
    assert_eq!(sample_iid(&d, 100_000, 9).unwrap(), serial);
}

#[test]
fn registry_errors() {
    assert!(matches!(
        DistributionSpec::from_name("cauchy", &BTreeMap::new()),
        Err(DistributionError::UnknownDistribution(_))
    ));
    let bad: BTreeMap<String, f64> = [("sd".to_string(), -1.0)].into();
    assert!(DistributionSpec::from_name("normal", &bad).is_err());
    assert!(matches!(
        sample_iid(&DistributionSpec::rademacher(), 0, 1),
        Err(DistributionError::EmptySample)
    ));
}

#[test]
fn closed_form_examples() {
    let r = truncated_second_moment(&DistributionSpec::rademacher(), &Transform::Identity, 1.0, MomentMethod::Analytic);
    assert_eq!(r.unwrap().value, 1.0);
    let s = truncated_second_moment(
        &DistributionSpec::square_tail(),
        &Transform::Identity,
        std::f64::consts::E,
        MomentMethod::Analytic,
    )
    .unwrap();
    assert!((s.value - 2.0).abs() < 1e-15);
}

#[test]
fn normal_l_matches_quadrature() {
    let m = analytic(&DistributionSpec::standard_normal(), Transform::Identity);
    for x in [0.25, 0.5, 0.999, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0] {
        let oracle = normal_l_quadrature(x);
        assert!((m.eval(x) - oracle).abs() <= 1e-10, "x = {x}: {} vs {oracle}", m.eval(x));
    }
}

#[test]
fn scaled_normal_and_monomials_match_quadrature() {
    let sd = 1.7;
    let d = DistributionSpec::new(Law::Normal { sd }).unwrap();
    let density = |t: f64| (-0.5 * (t / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
    // cube: |x|^3 <= a  <=>  |x| <= a^(1/3); integrand x^6
    let a: f64 = 20.0;
    let oracle = 2.0 * simpson(|t| t.powi(6) * density(t), 0.0, a.cbrt(), 20_000);
    let m = analytic(&d, Transform::Cube);
    assert!((m.eval(a) - oracle).abs() <= 1e-9 * oracle, "{} vs {oracle}", m.eval(a));
}

#[test]
fn centered_square_matches_quadrature() {
    let d = DistributionSpec::standard_normal();
    let m = analytic(&d, Transform::CenteredSquare);
    let h = |t: f64| (t * t - 1.0) / std::f64::consts::SQRT_2;
    let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    for x in [0.3, 0.7, 1.5, 4.0] {
        let integrand = |t: f64| h(t) * h(t) * density(t);
        // |h(t)| <= x exactly on [lo, hi] for t >= 0.
        let lo = (1.0 - std::f64::consts::SQRT_2 * x).max(0.0).sqrt();
        let hi = (1.0 + std::f64::consts::SQRT_2 * x).sqrt();
        let oracle = 2.0 * simpson(integrand, lo, hi, 20_000);
        assert!((m.eval(x) - oracle).abs() <= 1e-10, "x = {x}: {} vs {oracle}", m.eval(x));
    }
}

#[test]
fn empirical_agrees_with_analytic_within_four_se() {
    let cases = [
        (DistributionSpec::standard_normal(), vec![0.5, 1.0, 2.0, 3.0]),
        (DistributionSpec::square_tail(), vec![2.0, 10.0, 100.0]),
        (DistributionSpec::rademacher(), vec![0.5, 1.0, 2.0]),
    ];
    for (d, grid) in cases {
        let exact = analytic(&d, Transform::Identity);
        let emp = EmpiricalMoment::new(&d, &Transform::Identity, 1_000_000, 4).unwrap();
        for x in grid {
            let e = emp.estimate(x);
            let truth = exact.eval(x);
            assert!(
                (e.value - truth).abs() <= 4.0 * e.std_error.max(1e-15),
                "{} x = {x}: {} +- {} vs {truth}",
                d.name(),
                e.value,
                e.std_error
            );
        }
    }
}

#[test]
fn zero_budget_is_rejected() {
    assert!(EmpiricalMoment::new(&DistributionSpec::standard_normal(), &Transform::Identity, 0, 1).is_err());
}

#[test]
fn slow_variation_examples() {
    let rad = analytic(&DistributionSpec::rademacher(), Transform::Identity);
    let r = slow_variation_diagnostic(&rad, &[2.0, 4.0, 8.0], 0.05).unwrap();
    assert!(r.rows.iter().all(|row| row.ratio == Some(1.0)));

    let st = analytic(&DistributionSpec::square_tail(), Transform::Identity);
    let r = slow_variation_diagnostic(&st, &[10.0, 100.0, 1000.0], 0.05).unwrap();
    for row in &r.rows {
        let closed = (2.0 * row.x).ln() / row.x.ln();
        assert!((row.ratio.unwrap() - closed).abs() < 1e-14);
    }
    assert!((r.rows[0].ratio.unwrap() - 1.30103).abs() < 1e-5);

    let nm = analytic(&DistributionSpec::standard_normal(), Transform::Identity);
    let r = slow_variation_diagnostic(&nm, &[5.0, 10.0], 0.05).unwrap();
    assert!(r.rows.iter().all(|row| (row.ratio.unwrap() - 1.0).abs() < 1e-4));
    assert!(r.slowly_varying);

    assert!(slow_variation_diagnostic(&nm, &[], 0.05).is_err());
}

fn builtin() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        Just(DistributionSpec::rademacher()),
        Just(DistributionSpec::standard_normal()),
        Just(DistributionSpec::square_tail()),
        (0.01..0.99f64).prop_map(|p| DistributionSpec::new(Law::Bernoulli { p }).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l_is_nondecreasing(d in builtin(), mut grid in prop::collection::vec(0.01..1e4f64, 2..30)) {
        grid.sort_by(f64::total_cmp);
        let m = analytic(&d, Transform::Identity);
        for w in grid.windows(2) {
            prop_assert!(m.eval(w[0]) <= m.eval(w[1]));
        }
    }

    #[test]
    fn sampling_is_deterministic(d in builtin(), seed in any::<u64>(), n in 1usize..500) {
        let a = sample_iid(&d, n, seed).unwrap();
        let b = sample_iid(&d, n, seed).unwrap();
        prop_assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }
}
