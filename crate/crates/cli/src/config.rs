//! Experiment configuration: a TOML document plus scalar overrides.
//!
//! ```toml
//! subcommand = "rate"
//! seed = 7
//! workers = 4
//! n = 20000
//! x_grid = [2.0, 2.5, 3.0, 3.5]
//! reps = 400000
//!
//! [distribution]
//! name = "normal"
//! params = { sd = 1.0 }
//!
//! [[kernel]]
//! lambda = 1.0
//! transform = "identity"
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use selfnorm::mdp::BandMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Rate,
    Lil,
    Zcalc,
    Audit,
    KernelCheck,
}

impl Subcommand {
    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Rate => "rate",
            Subcommand::Lil => "lil",
            Subcommand::Zcalc => "zcalc",
            Subcommand::Audit => "audit",
            Subcommand::KernelCheck => "kernel-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionBlock {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentBlock {
    pub lambda: f64,
    pub transform: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    #[default]
    Auto,
    Analytic,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Combined standard errors allowed between estimator and oracle.
    #[serde(default = "default_oracle_se")]
    pub oracle_se: f64,
    /// Relative drift of `L(2x)/L(x)` tolerated by the slow-variation check.
    #[serde(default = "default_slow_variation")]
    pub slow_variation: f64,
    #[serde(default = "default_lil_low")]
    pub lil_band_low: f64,
    #[serde(default = "default_lil_high")]
    pub lil_band_high: f64,
    /// Checkpoints below this size are ignored for per-path maxima.
    #[serde(default = "default_lil_n_min")]
    pub lil_n_min: u64,
}

fn default_oracle_se() -> f64 {
    4.0
}
fn default_slow_variation() -> f64 {
    selfnorm::distributions::DEFAULT_SLOW_VARIATION_TOLERANCE
}
fn default_lil_low() -> f64 {
    0.3
}
fn default_lil_high() -> f64 {
    4.5
}
fn default_lil_n_min() -> u64 {
    1000
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            oracle_se: default_oracle_se(),
            slow_variation: default_slow_variation(),
            lil_band_low: default_lil_low(),
            lil_band_high: default_lil_high(),
            lil_n_min: default_lil_n_min(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerTailBlock {
    pub distribution: DistributionBlock,
    pub n: u64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClsBlock {
    pub distribution: DistributionBlock,
    #[serde(default = "default_transform")]
    pub transform: String,
    pub n: u64,
    pub b: f64,
    pub v: f64,
    pub s: f64,
    /// Falls back to the top-level `reps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
}

fn default_transform() -> String {
    "identity".to_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlzBlock {
    /// Falls back to the top-level distribution and kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernel: Vec<ComponentBlock>,
    pub n: u64,
    #[serde(default = "default_glz_k")]
    pub k: f64,
    pub x: f64,
    /// Per-component truncation levels; required for unbounded kernels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
}

fn default_glz_k() -> f64 {
    selfnorm::inequality_audit::DEFAULT_GLZ_K
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditBlock {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lower_tail: Vec<LowerTailBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cls: Vec<ClsBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub glz: Vec<GlzBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<BandMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment: Option<MomentKind>,
    /// Sample budget for empirical moments and the kernel checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernel: Vec<ComponentBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditBlock>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_workers() -> usize {
    1
}

pub const DEFAULT_THETA: f64 = selfnorm::lil::DEFAULT_THETA;
pub const DEFAULT_LIL_PATHS: u64 = 20;
pub const DEFAULT_CHECK_BUDGET: usize = 100_000;
pub const DEFAULT_CHECK_N: u64 = 10_000;
pub const DEFAULT_CHECK_X: f64 = 2.0;

impl ExperimentConfig {
    pub fn new(subcommand: Subcommand) -> Self {
        Self {
            subcommand,
            seed: 0,
            workers: 1,
            output_dir: None,
            n: None,
            n_max: None,
            x_n: None,
            x_grid: None,
            theta: None,
            reps: None,
            seeds: None,
            band: None,
            oracle: None,
            moment: None,
            budget: None,
            probe_grid: None,
            counterexample: None,
            distribution: None,
            kernel: Vec::new(),
            audit: None,
            tolerances: Tolerances::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }

    /// Fills the defaults each subcommand relies on, so the resolved config
    /// records every value that shaped the run.
    pub fn resolve_defaults(&mut self) {
        match self.subcommand {
            Subcommand::Rate => {
                self.band.get_or_insert(BandMethod::Normal);
                self.oracle.get_or_insert(true);
            }
            Subcommand::Lil => {
                self.theta.get_or_insert(DEFAULT_THETA);
                let seed = self.seed;
                self.seeds
                    .get_or_insert_with(|| (0..DEFAULT_LIL_PATHS).map(|i| seed.wrapping_add(i)).collect());
                self.counterexample.get_or_insert(false);
            }
            Subcommand::Zcalc => {
                self.moment.get_or_insert(MomentKind::Auto);
                self.budget
                    .get_or_insert(selfnorm::distributions::DEFAULT_EMPIRICAL_BUDGET);
            }
            Subcommand::KernelCheck => {
                self.moment.get_or_insert(MomentKind::Auto);
                self.budget.get_or_insert(DEFAULT_CHECK_BUDGET);
                self.n.get_or_insert(DEFAULT_CHECK_N);
                self.x_n.get_or_insert(DEFAULT_CHECK_X);
            }
            Subcommand::Audit => {}
        }
    }
}

/// Scalar fields settable from the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub n: Option<u64>,
    pub n_max: Option<u64>,
    pub x_n: Option<f64>,
    pub x_grid: Option<Vec<f64>>,
    pub theta: Option<f64>,
    pub reps: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub band: Option<BandMethod>,
    pub budget: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = Some(v.clone());
        }
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    cfg.$field = Some(v.clone());
                })*
            };
        }
        set!(n, n_max, x_n, x_grid, theta, reps, seeds, band, budget);
    }
}
