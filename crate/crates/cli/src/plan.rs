//! Validation: a config becomes a typed plan, or a list of field errors.
//! Nothing here samples.

use serde::Serialize;
use selfnorm::distributions::{DistributionSpec, MomentMethod};
use selfnorm::kernels::{Component, KernelSpec, Transform, MIN_CHECK_BUDGET};
use selfnorm::mdp::{TailOptions, MIN_REPS};
use selfnorm::lil::FIRST_CHECKPOINT;

use crate::config::{ComponentBlock, DistributionBlock, ExperimentConfig, MomentKind, Subcommand};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct RatePlan {
    pub dist: DistributionSpec,
    pub kernel: KernelSpec,
    pub n: u64,
    pub x_grid: Vec<f64>,
    pub reps: u64,
    pub seed: u64,
    pub opts: TailOptions,
    pub oracle_se: f64,
}

#[derive(Debug, Clone)]
pub struct LilPlan {
    pub dist: DistributionSpec,
    pub kernel: KernelSpec,
    pub n_max: u64,
    pub theta: f64,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub n_min: u64,
    pub band: (f64, f64),
    pub counterexample: bool,
}

#[derive(Debug, Clone)]
pub struct ZcalcPlan {
    pub dist: DistributionSpec,
    pub kernel: KernelSpec,
    pub n: u64,
    pub x_n: f64,
    pub method: MomentMethod,
    pub slow_variation: f64,
}

#[derive(Debug, Clone)]
pub struct KernelCheckPlan {
    pub dist: DistributionSpec,
    pub kernel: KernelSpec,
    pub n: u64,
    pub x_n: f64,
    pub budget: usize,
    pub seed: u64,
    pub method: MomentMethod,
    pub probe_grid: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LowerTailPlan {
    pub dist: DistributionSpec,
    pub n: u64,
    pub x: f64,
}

#[derive(Debug, Clone)]
pub struct ClsPlan {
    pub dist: DistributionSpec,
    pub transform: Transform,
    pub n: u64,
    pub b: f64,
    pub v: f64,
    pub s: f64,
    pub reps: u64,
}

#[derive(Debug, Clone)]
pub struct GlzPlan {
    pub dist: DistributionSpec,
    pub kernel: KernelSpec,
    pub n: u64,
    pub k: f64,
    pub x: f64,
    pub truncation: Option<Vec<f64>>,
    pub reps: u64,
}

#[derive(Debug, Clone)]
pub struct AuditPlan {
    pub lower_tail: Vec<LowerTailPlan>,
    pub cls: Vec<ClsPlan>,
    pub glz: Vec<GlzPlan>,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub enum Plan {
    Rate(RatePlan),
    Lil(LilPlan),
    Zcalc(ZcalcPlan),
    Audit(AuditPlan),
    KernelCheck(KernelCheckPlan),
}

/// Accumulates field errors so a config reports every problem at once.
#[derive(Default)]
struct Checker {
    errors: Vec<FieldError>,
}

impl Checker {
    fn fail(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError::new(field, message));
    }

    fn require<T: Clone>(&mut self, field: &str, value: &Option<T>) -> Option<T> {
        if value.is_none() {
            self.fail(field, "required for this subcommand");
        }
        value.clone()
    }

    fn distribution(&mut self, field: &str, block: Option<&DistributionBlock>) -> Option<DistributionSpec> {
        let Some(block) = block else {
            self.fail(field, "required for this subcommand");
            return None;
        };
        match DistributionSpec::from_name(&block.name, &block.params) {
            Ok(d) => Some(d),
            Err(e) => {
                self.fail(field, e.to_string());
                None
            }
        }
    }

    fn kernel(&mut self, field: &str, blocks: &[ComponentBlock]) -> Option<KernelSpec> {
        if blocks.is_empty() {
            self.fail(field, "at least one (lambda, transform) component is required");
            return None;
        }
        let mut components = Vec::new();
        for (i, b) in blocks.iter().enumerate() {
            match Transform::parse(&b.transform) {
                Ok(t) => components.push(Component::new(b.lambda, t)),
                Err(e) => self.fail(format!("{field}[{i}].transform"), e.to_string()),
            }
        }
        if components.len() != blocks.len() {
            return None;
        }
        match KernelSpec::new(components) {
            Ok(k) if k.is_null() => {
                self.fail(field, "every lambda is zero, so the self-normalizer vanishes identically");
                None
            }
            Ok(k) => Some(k),
            Err(e) => {
                self.fail(field, e.to_string());
                None
            }
        }
    }

    fn positive(&mut self, field: &str, value: f64) -> bool {
        let ok = value.is_finite() && value > 0.0;
        if !ok {
            self.fail(field, format!("must be finite and positive, got {value}"));
        }
        ok
    }

    fn deviation(&mut self, field: &str, x: f64, n: Option<u64>) {
        if self.positive(field, x) {
            if let Some(n) = n {
                if x * x >= n as f64 {
                    self.fail(field, format!("x_n^2 = {} must be below n = {n}", x * x));
                }
            }
        }
    }

    fn sample_size(&mut self, field: &str, n: Option<u64>, min: u64) -> Option<u64> {
        match n {
            Some(v) if v < min => {
                self.fail(field, format!("must be at least {min}, got {v}"));
                None
            }
            other => other,
        }
    }

    fn finish<T>(self, plan: Option<T>) -> Result<T, Vec<FieldError>> {
        match plan {
            Some(p) if self.errors.is_empty() => Ok(p),
            _ => Err(self.errors),
        }
    }
}

fn moment_method(kind: Option<MomentKind>, budget: usize, seed: u64) -> MomentMethod {
    match kind.unwrap_or_default() {
        MomentKind::Auto => MomentMethod::Auto { budget, seed },
        MomentKind::Analytic => MomentMethod::Analytic,
        MomentKind::Empirical => MomentMethod::Empirical { budget, seed },
    }
}

fn check_common(c: &mut Checker, cfg: &ExperimentConfig) {
    if cfg.workers == 0 {
        c.fail("workers", "must be at least 1");
    }
    if i64::try_from(cfg.seed).is_err() {
        c.fail("seed", "must fit in a signed 64-bit integer");
    }
}

/// Checks every numeric field against the preconditions of the module it
/// feeds, after defaults have been resolved.
pub fn validate(cfg: &ExperimentConfig) -> Result<Plan, Vec<FieldError>> {
    let mut c = Checker::default();
    check_common(&mut c, cfg);
    match cfg.subcommand {
        Subcommand::Rate => validate_rate(c, cfg).map(Plan::Rate),
        Subcommand::Lil => validate_lil(c, cfg).map(Plan::Lil),
        Subcommand::Zcalc => validate_zcalc(c, cfg).map(Plan::Zcalc),
        Subcommand::Audit => validate_audit(c, cfg).map(Plan::Audit),
        Subcommand::KernelCheck => validate_kernel_check(c, cfg).map(Plan::KernelCheck),
    }
}

fn validate_rate(mut c: Checker, cfg: &ExperimentConfig) -> Result<RatePlan, Vec<FieldError>> {
    let dist = c.distribution("distribution", cfg.distribution.as_ref());
    let kernel = c.kernel("kernel", &cfg.kernel);
    let n = c.require("n", &cfg.n);
    let n = c.sample_size("n", n, 2);
    let reps = c.require("reps", &cfg.reps);
    if let Some(r) = reps {
        if r < MIN_REPS {
            c.fail("reps", format!("must be at least {MIN_REPS}, got {r}"));
        }
    }
    let x_grid = c.require("x_grid", &cfg.x_grid);
    if let Some(grid) = &x_grid {
        if grid.is_empty() {
            c.fail("x_grid", "must not be empty");
        }
        for (i, &x) in grid.iter().enumerate() {
            c.deviation(&format!("x_grid[{i}]"), x, n);
        }
        if grid.windows(2).any(|w| w[1].is_nan() || w[1] <= w[0]) {
            c.fail("x_grid", "must be strictly increasing");
        }
    }
    let se = cfg.tolerances.oracle_se;
    c.positive("tolerances.oracle_se", se);
    let plan = (|| {
        Some(RatePlan {
            dist: dist?,
            kernel: kernel?,
            n: n?,
            x_grid: x_grid?,
            reps: reps?,
            seed: cfg.seed,
            opts: TailOptions {
                workers: cfg.workers,
                band: cfg.band.unwrap_or_default(),
                oracle: cfg.oracle.unwrap_or(true),
            },
            oracle_se: se,
        })
    })();
    c.finish(plan)
}

fn validate_lil(mut c: Checker, cfg: &ExperimentConfig) -> Result<LilPlan, Vec<FieldError>> {
    let dist = c.distribution("distribution", cfg.distribution.as_ref());
    let kernel = c.kernel("kernel", &cfg.kernel);
    let n_max = c.require("n_max", &cfg.n_max);
    let n_max = c.sample_size("n_max", n_max, FIRST_CHECKPOINT);
    let theta = cfg.theta.unwrap_or(crate::config::DEFAULT_THETA);
    if !(theta > 1.0 && theta <= 2.0) {
        c.fail("theta", format!("must lie in (1, 2], got {theta}"));
    }
    let seeds = cfg.seeds.clone().unwrap_or_default();
    if seeds.is_empty() {
        c.fail("seeds", "at least one seed is required");
    }
    if seeds.iter().any(|&s| i64::try_from(s).is_err()) {
        c.fail("seeds", "each seed must fit in a signed 64-bit integer");
    }
    let t = &cfg.tolerances;
    if !(t.lil_band_low.is_finite() && t.lil_band_high.is_finite() && t.lil_band_low <= t.lil_band_high) {
        c.fail("tolerances.lil_band_low", "band must be finite with low <= high");
    }
    let plan = (|| {
        Some(LilPlan {
            dist: dist?,
            kernel: kernel?,
            n_max: n_max?,
            theta,
            seeds,
            workers: cfg.workers,
            n_min: t.lil_n_min,
            band: (t.lil_band_low, t.lil_band_high),
            counterexample: cfg.counterexample.unwrap_or(false),
        })
    })();
    c.finish(plan)
}

fn validate_zcalc(mut c: Checker, cfg: &ExperimentConfig) -> Result<ZcalcPlan, Vec<FieldError>> {
    let dist = c.distribution("distribution", cfg.distribution.as_ref());
    let kernel = c.kernel("kernel", &cfg.kernel);
    let n = c.require("n", &cfg.n);
    let n = c.sample_size("n", n, 2);
    let x_n = c.require("x_n", &cfg.x_n);
    if let Some(x) = x_n {
        c.deviation("x_n", x, n);
    }
    let budget = cfg.budget.unwrap_or(selfnorm::distributions::DEFAULT_EMPIRICAL_BUDGET);
    if budget == 0 {
        c.fail("budget", "must be positive");
    }
    if let (Some(d), Some(k), Some(MomentKind::Analytic)) = (&dist, &kernel, cfg.moment) {
        for (i, comp) in k.components().iter().enumerate() {
            if !d.has_analytic_moment(&comp.transform) {
                c.fail(
                    format!("kernel[{i}]"),
                    format!("no closed-form L for {} under {}; use moment = \"auto\"", comp.transform, d.name()),
                );
            }
        }
    }
    let slow = cfg.tolerances.slow_variation;
    c.positive("tolerances.slow_variation", slow);
    let plan = (|| {
        Some(ZcalcPlan {
            dist: dist?,
            kernel: kernel?,
            n: n?,
            x_n: x_n?,
            method: moment_method(cfg.moment, budget, cfg.seed),
            slow_variation: slow,
        })
    })();
    c.finish(plan)
}

fn validate_kernel_check(mut c: Checker, cfg: &ExperimentConfig) -> Result<KernelCheckPlan, Vec<FieldError>> {
    let dist = c.distribution("distribution", cfg.distribution.as_ref());
    let kernel = c.kernel("kernel", &cfg.kernel);
    let n = c.sample_size("n", Some(cfg.n.unwrap_or(crate::config::DEFAULT_CHECK_N)), 2);
    let x_n = cfg.x_n.unwrap_or(crate::config::DEFAULT_CHECK_X);
    c.deviation("x_n", x_n, n);
    let budget = cfg.budget.unwrap_or(crate::config::DEFAULT_CHECK_BUDGET);
    if budget < MIN_CHECK_BUDGET {
        c.fail("budget", format!("must be at least {MIN_CHECK_BUDGET}, got {budget}"));
    }
    let probe_grid = match (&cfg.probe_grid, &dist) {
        (Some(g), _) => g.clone(),
        (None, Some(d)) => default_probe_grid(d),
        (None, None) => Vec::new(),
    };
    if cfg.probe_grid.as_ref().is_some_and(Vec::is_empty) {
        c.fail("probe_grid", "must not be empty");
    }
    if probe_grid.iter().any(|x| !x.is_finite()) {
        c.fail("probe_grid", "entries must be finite");
    }
    let plan = (|| {
        Some(KernelCheckPlan {
            dist: dist?,
            kernel: kernel?,
            n: n?,
            x_n,
            budget,
            seed: cfg.seed,
            method: moment_method(cfg.moment, budget, cfg.seed),
            probe_grid,
        })
    })();
    c.finish(plan)
}

/// Support points for finite laws, otherwise `[-5, 5]` in steps of 0.01.
pub fn default_probe_grid(dist: &DistributionSpec) -> Vec<f64> {
    match dist.atoms() {
        Some(atoms) => atoms.into_iter().filter(|a| a.1 > 0.0).map(|a| a.0).collect(),
        None => (-500..=500).map(|i| f64::from(i) / 100.0).collect(),
    }
}

fn validate_audit(mut c: Checker, cfg: &ExperimentConfig) -> Result<AuditPlan, Vec<FieldError>> {
    let Some(audit) = &cfg.audit else {
        c.fail("audit", "at least one [[audit.lower_tail]], [[audit.cls]] or [[audit.glz]] block is required");
        return Err(c.errors);
    };
    if audit.lower_tail.is_empty() && audit.cls.is_empty() && audit.glz.is_empty() {
        c.fail("audit", "no bound blocks given");
    }
    let mut lower_tail = Vec::new();
    for (i, b) in audit.lower_tail.iter().enumerate() {
        let f = |name: &str| format!("audit.lower_tail[{i}].{name}");
        let dist = c.distribution(&f("distribution"), Some(&b.distribution));
        if b.n == 0 {
            c.fail(f("n"), "must be at least 1");
        }
        if let Some(d) = &dist {
            if !d.is_nonnegative() {
                c.fail(f("distribution"), format!("{} is not a nonnegative law", d.name()));
            } else if let Some(atoms) = d.atoms() {
                let mu = b.n as f64 * atoms.iter().map(|(v, p)| v * p).sum::<f64>();
                if !(b.x > 0.0 && b.x < mu) {
                    c.fail(f("x"), format!("bound needs 0 < x < mu_n = {mu}, got {}", b.x));
                }
            }
        }
        if let Some(dist) = dist {
            lower_tail.push(LowerTailPlan { dist, n: b.n, x: b.x });
        }
    }
    let mut cls = Vec::new();
    for (i, b) in audit.cls.iter().enumerate() {
        let f = |name: &str| format!("audit.cls[{i}].{name}");
        let dist = c.distribution(&f("distribution"), Some(&b.distribution));
        let transform = match Transform::parse(&b.transform) {
            Ok(t) => Some(t),
            Err(e) => {
                c.fail(f("transform"), e.to_string());
                None
            }
        };
        if b.n == 0 {
            c.fail(f("n"), "must be at least 1");
        }
        c.positive(&f("b"), b.b);
        c.positive(&f("v"), b.v);
        c.positive(&f("s"), b.s);
        if let (Some(d), Some(t)) = (&dist, &transform) {
            if !d.has_analytic_moment(t) {
                c.fail(f("transform"), format!("no closed-form truncated moments for {t} under {}", d.name()));
            }
        }
        let reps = b.reps.or(cfg.reps).unwrap_or(0);
        if let (Some(dist), Some(transform)) = (dist, transform) {
            if dist.atoms().is_none() && reps == 0 {
                c.fail(f("reps"), "Monte Carlo replications required for a continuous law");
            }
            cls.push(ClsPlan {
                dist,
                transform,
                n: b.n,
                b: b.b,
                v: b.v,
                s: b.s,
                reps,
            });
        }
    }
    let mut glz = Vec::new();
    for (i, b) in audit.glz.iter().enumerate() {
        let f = |name: &str| format!("audit.glz[{i}].{name}");
        let dist = c.distribution(&f("distribution"), b.distribution.as_ref().or(cfg.distribution.as_ref()));
        let kernel = c.kernel(&f("kernel"), if b.kernel.is_empty() { &cfg.kernel } else { &b.kernel });
        if b.n == 0 {
            c.fail(f("n"), "must be at least 1");
        }
        c.positive(&f("k"), b.k);
        if !(b.x.is_finite() && b.x >= 0.0) {
            c.fail(f("x"), format!("must be finite and nonnegative, got {}", b.x));
        }
        let reps = b.reps.or(cfg.reps).unwrap_or(0);
        if reps == 0 {
            c.fail(f("reps"), "Monte Carlo replications required");
        }
        if let (Some(d), Some(k)) = (&dist, &kernel) {
            match &b.truncation {
                Some(levels) if levels.len() != k.len() => c.fail(
                    f("truncation"),
                    format!("kernel has {} components but {} levels were given", k.len(), levels.len()),
                ),
                Some(levels) if levels.iter().any(|z| z.is_nan() || *z <= 0.0) => {
                    c.fail(f("truncation"), "levels must be positive")
                }
                None if d.atoms().is_none() => c.fail(
                    f("truncation"),
                    format!("kernel is unbounded under {}; truncation levels are required", d.name()),
                ),
                _ => {}
            }
        }
        if let (Some(dist), Some(kernel)) = (dist, kernel) {
            glz.push(GlzPlan {
                dist,
                kernel,
                n: b.n,
                k: b.k,
                x: b.x,
                truncation: b.truncation.clone(),
                reps,
            });
        }
    }
    c.finish(Some(AuditPlan {
        lower_tail,
        cls,
        glz,
        seed: cfg.seed,
        workers: cfg.workers,
    }))
}
