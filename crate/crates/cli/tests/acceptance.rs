//! One line per acceptance criterion; exits non-zero if any fails.

use std::fs;
use std::time::{Duration, Instant};

use selfnorm::distributions::{sample_iid, sample_stream};
use selfnorm::inequality_audit::{cls_truncated_bound, glz_decoupled_bound, lower_tail_bound, MonteCarlo};
use selfnorm::kernels::{check_degeneracy, check_orthogonality_a2};
use selfnorm::lil::{simulate_many, PathSummary};
use selfnorm::mdp::{rate_curve, TailOptions};
use selfnorm::rng::{mix64, StreamKey};
use selfnorm::statistics::{u_stat, u_stat_bruteforce, w_stat};
use selfnorm::truncation::{compute_z, identity_residual};
use selfnorm::{Component, DistributionSpec, KernelSpec, Law, MomentMethod, SecondMoment, Transform};
use selfnorm_cli::{run_config, ExperimentConfig};

/// Small deterministic generator for choosing random instances.
struct Picker(u64);

impl Picker {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        mix64(self.0)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn criterion_1() -> Outcome {
    let mut pick = Picker(1);
    let laws = [
        DistributionSpec::standard_normal(),
        DistributionSpec::rademacher(),
        DistributionSpec::square_tail(),
        DistributionSpec::new(Law::Bernoulli { p: 0.3 }).unwrap(),
    ];
    let mut worst = 0.0f64;
    for instance in 0..100u64 {
        let n = 2 + pick.below(199) as usize;
        let m = 1 + pick.below(4) as usize;
        let comps = (0..m)
            .map(|_| {
                let t = match pick.below(5) {
                    0 => Transform::Identity,
                    1 => Transform::Square,
                    2 => Transform::Cube,
                    3 => Transform::CenteredSquare,
                    _ => Transform::Polynomial((0..3).map(|_| 4.0 * pick.unit() - 2.0).collect()),
                };
                Component::new(0.05 + 3.0 * pick.unit(), t)
            })
            .collect();
        let k = KernelSpec::new(comps).unwrap();
        let d = &laws[pick.below(laws.len() as u64) as usize];
        let xs = sample_iid(d, n, 1_000 + instance).unwrap();
        let fast = u_stat(&xs, &k).unwrap();
        let slow = u_stat_bruteforce(&xs, &k).unwrap();
        let rel = if slow == 0.0 { fast.abs() } else { ((fast - slow) / slow).abs() };
        worst = worst.max(rel);
    }
    outcome(worst <= 1e-10, format!("max relative error {worst:.2e} over 100 instances (tol 1e-10)"))
}

fn criterion_2() -> Outcome {
    let mut pick = Picker(2);
    let mut worst = 0.0f64;
    for s in 0..1000u64 {
        let n = 5 + pick.below(496) as usize;
        let xs = sample_iid(&DistributionSpec::rademacher(), n, s).unwrap();
        let product = w_stat(&xs, &KernelSpec::product()).unwrap().w;
        let remark = w_stat(&xs, &KernelSpec::remark()).unwrap().w;
        worst = worst.max((remark - 2.0 * product).abs());
    }
    outcome(worst <= 1e-12, format!("max |W_remark - 2 W_product| = {worst:.2e} over 1000 samples (tol 1e-12)"))
}

fn criterion_3() -> Outcome {
    let rad = compute_z(&DistributionSpec::rademacher(), &Transform::Identity, 10_000, 2.0, MomentMethod::Analytic);
    let d = DistributionSpec::square_tail();
    let m = SecondMoment::resolve(&d, &Transform::Identity, MomentMethod::Analytic).unwrap();
    let ns = [1_000u64, 10_000, 100_000, 1_000_000, 10_000_000];
    let xs = [1.5, 2.0, 3.0, 5.0];
    let mut z = vec![vec![0.0; xs.len()]; ns.len()];
    let mut worst = 0.0f64;
    for (i, &n) in ns.iter().enumerate() {
        for (j, &x) in xs.iter().enumerate() {
            let v = compute_z(&d, &Transform::Identity, n, x, MomentMethod::Analytic).unwrap();
            worst = worst.max(identity_residual(m.eval(v), v, n, x));
            z[i][j] = v;
        }
    }
    let in_n = (1..ns.len()).all(|i| (0..xs.len()).all(|j| z[i][j] > z[i - 1][j]));
    let in_x = (0..ns.len()).all(|i| (1..xs.len()).all(|j| z[i][j] < z[i][j - 1]));
    let exact = rad == Ok(50.0);
    outcome(
        exact && worst <= 1e-6 && in_n && in_x,
        format!(
            "rademacher z = {rad:?} (want 50); square-tail max residual {worst:.2e} on 20 points (tol 1e-6); \
             increasing in n: {in_n}; decreasing in x: {in_x}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let opts = TailOptions {
        workers: 4,
        ..TailOptions::default()
    };
    let grid = [2.0, 2.5, 3.0, 3.5];
    let curve = match rate_curve(
        &DistributionSpec::standard_normal(),
        &KernelSpec::product(),
        20_000,
        &grid,
        400_000,
        2024,
        &opts,
    ) {
        Ok(c) => c,
        Err(e) => return outcome(false, e.to_string()),
    };
    let rates: Vec<f64> = curve.log_rates().into_iter().map(|r| r.unwrap_or(f64::NAN)).collect();
    let increasing = curve.is_strictly_increasing();
    let below_half = rates.iter().all(|&r| r < -0.5);
    let mut worst_z = 0.0f64;
    for row in &curve.rows {
        let o = row.oracle.as_ref().expect("single component kernel");
        let gap = (row.estimate.p_hat - o.p_hat).abs() / (row.estimate.std_error + o.std_error);
        worst_z = worst_z.max(gap);
    }
    let lift = rates[3] - rates[0];
    outcome(
        increasing && below_half && worst_z <= 4.0 && lift > 0.15,
        format!(
            "r_hat = {:?}; strictly increasing toward -1/2: {}; max oracle gap {worst_z:.2} combined SE (tol 4); \
             r_hat(3.5) - r_hat(2) = {lift:.3} (need > 0.15)",
            rates.iter().map(|r| (r * 1e4).round() / 1e4).collect::<Vec<_>>(),
            increasing && below_half
        ),
    )
}

fn criterion_5() -> Outcome {
    let d = DistributionSpec::standard_normal();
    let k = KernelSpec::product();
    let seeds: Vec<u64> = (1..=20).collect();
    let n_max = 1_000_000;
    let paths = match simulate_many(&d, &k, n_max, 1.2, &seeds, 4) {
        Ok(p) => p,
        Err(e) => return outcome(false, e.to_string()),
    };
    let summary = PathSummary::new(&paths, 1_000);
    let inside = summary.fraction_within(0.3, 4.5);
    let mut worst = 0.0f64;
    for p in &paths {
        let xs = sample_stream(&d, &StreamKey::new(p.seed, 0), n_max as usize).unwrap();
        for (&n, w) in p.checkpoints.iter().zip(&p.w) {
            let fresh = w_stat(&xs[..n as usize], &k).unwrap().w;
            worst = worst.max((w.unwrap_or(f64::NAN) - fresh).abs() / fresh.abs().max(1.0));
        }
    }
    outcome(
        inside >= 0.9 && worst <= 1e-9,
        format!(
            "{:.0}% of 20 path maxima (n >= 1e3) in [0.3, 4.5] (need >= 90%); median {:.3}; \
             incremental vs fresh max error {worst:.2e} (tol 1e-9)",
            100.0 * inside,
            summary.median.unwrap_or(f64::NAN)
        ),
    )
}

fn criterion_6() -> Outcome {
    let bern = DistributionSpec::new(Law::Bernoulli { p: 0.5 }).unwrap();
    let lower = lower_tail_bound(&bern, 100, 30.0).unwrap();
    let lower_ok = lower.exact && lower.satisfied && lower.empirical_p <= (-4.0f64).exp();

    let rad = DistributionSpec::rademacher();
    let none = MonteCarlo::new(0, 0);
    let cls = [
        cls_truncated_bound(&rad, &Transform::Identity, 10, 1.0, 1.0, 2.0, none).unwrap(),
        cls_truncated_bound(&rad, &Transform::Identity, 100, 1.0, 0.1, 1.0, none).unwrap(),
    ];
    let cls_ok = cls.iter().all(|r| r.exact && r.satisfied);

    let glz: Vec<_> = [150.0, 500.0, 1500.0]
        .iter()
        .map(|&x| {
            glz_decoupled_bound(&KernelSpec::product(), &rad, 50, 10.0, x, None, MonteCarlo::new(1_000_000, 6).with_workers(4))
                .unwrap()
        })
        .collect();
    let glz_ok = glz.iter().all(|r| r.satisfied);
    outcome(
        lower_ok && cls_ok && glz_ok,
        format!(
            "lower tail p = {:.3e} <= {:.4}; truncated sum p = [{:.3e}, {:.3e}] vs {:.4}/{:.4}; decoupled (K = 10, n = 50, 1e6 reps) \
             upper limits {:?} vs bounds {:?}",
            lower.empirical_p,
            lower.bound_value,
            cls[0].empirical_p,
            cls[1].empirical_p,
            cls[0].bound_value,
            cls[1].bound_value,
            glz.iter().map(|r| format!("{:.2e}", r.upper_limit)).collect::<Vec<_>>(),
            glz.iter().map(|r| format!("{:.3}", r.bound_value)).collect::<Vec<_>>(),
        ),
    )
}

fn criterion_7() -> Outcome {
    let normal = DistributionSpec::standard_normal();
    let hermite = KernelSpec::hermite_pair(1.0, 0.5).unwrap();
    let deg = check_degeneracy(&hermite, &normal, 200_000, 7).unwrap();
    let a2 = check_orthogonality_a2(&hermite, &normal, 10_000, 2.0, 200_000, 7, MomentMethod::Analytic).unwrap();
    let square = KernelSpec::new(vec![Component::new(1.0, Transform::Square)]).unwrap();
    let sq = check_degeneracy(&square, &normal, 200_000, 7).unwrap();
    let remark = check_orthogonality_a2(
        &KernelSpec::remark(),
        &DistributionSpec::rademacher(),
        10_000,
        2.0,
        200_000,
        7,
        MomentMethod::Analytic,
    )
    .unwrap();
    let corr = remark.off_diagonal()[0].2;
    let hermite_ok = deg.iter().all(|v| v.pass) && a2.pass;
    outcome(
        hermite_ok && !sq[0].pass && corr == 1.0 && !remark.pass,
        format!(
            "hermite degeneracy + (a2) pass: {hermite_ok}; square degeneracy fails: {} (mean {:.4}); \
             remark (a2) correlation {corr} (fail: {})",
            !sq[0].pass,
            sq[0].estimate,
            !remark.pass
        ),
    )
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let base = r#"
subcommand = "rate"
seed = 8
n = 1000
x_grid = [1.0, 1.5, 2.0, 2.5]
reps = 20000
[distribution]
name = "normal"
[[kernel]]
lambda = 1.0
transform = "identity"
"#;
    let mut bytes = Vec::new();
    for workers in [1usize, 4, 16] {
        let mut cfg = ExperimentConfig::from_toml(base).unwrap();
        cfg.workers = workers;
        cfg.output_dir = Some(tmp.path().join(format!("w{workers}")));
        let out = match run_config(cfg, None) {
            Ok(o) => o,
            Err(e) => return outcome(false, e.to_string()),
        };
        bytes.push(fs::read(out.output_dir.join("rate.csv")).unwrap());
    }
    let same = bytes.windows(2).all(|w| w[0] == w[1]);
    outcome(same, format!("rate.csv identical for workers 1, 4, 16: {same} ({} bytes)", bytes[0].len()))
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 u_stat oracle equivalence", criterion_1, Some(Duration::from_secs(5))),
        ("2 remark factor two", criterion_2, Some(Duration::from_secs(5))),
        ("3 truncation solver", criterion_3, Some(Duration::from_secs(10))),
        ("4 moderate deviation trend", criterion_4, Some(Duration::from_secs(180))),
        ("5 lil band", criterion_5, Some(Duration::from_secs(240))),
        ("6 inequality auditors", criterion_6, Some(Duration::from_secs(120))),
        ("7 condition checkers", criterion_7, Some(Duration::from_secs(30))),
        ("8 determinism", criterion_8, None),
    ];
    let cpus = std::thread::available_parallelism().map_or(1, usize::from);
    println!("acceptance: {cpus} cpu(s) available");
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" / limit {}s", l.as_secs()));
        println!(
            "{} criterion {name}: {} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion/criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 8 criteria passed");
}
