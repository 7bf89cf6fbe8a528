use selfnorm::distributions::sample_iid;
use selfnorm::lil::{checkpoints, counterexample_report, quantile, simulate_many, simulate_path, PathSummary};
use selfnorm::statistics::w_stat;
use selfnorm::{DistributionSpec, KernelSpec};

#[test]
fn checkpoint_grid_closed_form() {
    let cps = checkpoints(1_000_000, 1.2);
    // round(1.2^j) for j = 16 is 18, the first value of at least 16.
    assert_eq!(cps[0], 18);
    assert!(cps.windows(2).all(|w| w[1] > w[0]));
    assert!(*cps.last().unwrap() <= 1_000_000);
    let expected: Vec<u64> = (0..100)
        .map(|j| 1.2f64.powi(j).round() as u64)
        .filter(|&n| (16..=1_000_000).contains(&n))
        .fold(Vec::new(), |mut v, n| {
            if v.last() != Some(&n) {
                v.push(n);
            }
            v
        });
    assert_eq!(cps, expected);
}

#[test]
fn incremental_sums_match_fresh_computation() {
    let d = DistributionSpec::standard_normal();
    let k = KernelSpec::hermite_pair(1.0, 0.7).unwrap();
    let n_max = 20_000;
    let path = simulate_path(&d, &k, n_max, 1.2, 4).unwrap();
    let xs = sample_iid(&d, n_max as usize, 4).unwrap();
    for (&n, w) in path.checkpoints.iter().zip(&path.w) {
        let fresh = w_stat(&xs[..n as usize], &k).unwrap().w;
        let w = w.unwrap();
        assert!((w - fresh).abs() <= 1e-9 * fresh.abs().max(1.0), "n = {n}: {w} vs {fresh}");
    }
}

#[test]
fn remark_ratio_closed_form() {
    let n_max = 50_000;
    let path = simulate_path(&DistributionSpec::rademacher(), &KernelSpec::remark(), n_max, 1.3, 8).unwrap();
    let xs = sample_iid(&DistributionSpec::rademacher(), n_max as usize, 8).unwrap();
    for (j, &n) in path.checkpoints.iter().enumerate() {
        let s: f64 = xs[..n as usize].iter().sum();
        let nf = n as f64;
        let expected = 2.0 * (s * s - nf) / (nf * nf.ln().ln());
        let got = path.ratio[j].unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0), "n = {n}");
    }
}

#[test]
fn counterexample_factor_is_two() {
    let report = counterexample_report(100_000, 1.2, &[1, 2, 3], 2).unwrap();
    assert!(report.notice.is_none());
    assert!(!report.rows.is_empty());
    for r in &report.rows {
        if let Some(f) = r.factor {
            assert!((f - 2.0).abs() <= 1e-12, "{r:?}");
        } else {
            assert_eq!(r.w_product, 0.0);
        }
    }
}

#[test]
fn many_paths_are_seed_ordered_and_worker_invariant() {
    let d = DistributionSpec::standard_normal();
    let k = KernelSpec::product();
    let seeds = [9, 3, 5, 1];
    let a = simulate_many(&d, &k, 5_000, 1.5, &seeds, 1).unwrap();
    let b = simulate_many(&d, &k, 5_000, 1.5, &seeds, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.iter().map(|p| p.seed).collect::<Vec<_>>(), seeds);
}

#[test]
fn summary_quantiles() {
    let d = DistributionSpec::standard_normal();
    let paths = simulate_many(&d, &KernelSpec::product(), 10_000, 1.2, &(0..10).collect::<Vec<_>>(), 2).unwrap();
    let s = PathSummary::new(&paths, 1_000);
    let mut m: Vec<f64> = paths.iter().map(|p| p.max_ratio_from(1_000).unwrap()).collect();
    m.sort_by(f64::total_cmp);
    assert_eq!(s.min, Some(m[0]));
    assert_eq!(s.max, Some(m[9]));
    assert_eq!(s.median, Some(0.5 * (m[4] + m[5])));
    assert_eq!(quantile(&m, 0.1), s.q10);
    assert_eq!(s.fraction_within(m[0], m[9]), 1.0);
}
