//! Sampleable laws and their truncated second-moment functions
//! `L(x) = E g(X)^2 1{|g(X)| <= x}`.
//!
//! Built-ins:
//!
//! * `rademacher`: uniform on {-1, +1}
//! * `normal`: centered normal, parameter `sd` (default 1)
//! * `square_tail`: symmetric, density `1/|x|^3` on `|x| >= 1`, so that
//!   `E X^2 1{|X| <= x} = 2 ln x` is slowly varying with infinite variance
//! * `bernoulli`: {0, 1} with parameter `p`
//! * `point_mass`: parameter `value`
//!
//! Sampling is counter-based (see [`crate::rng`]): draw `i` of stream `r`
//! under `seed` is a pure function of `(seed, r, i)`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use libm::erf;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::Transform;
use crate::rng::{open_unit, StreamKey};

/// Default sample budget of the empirical `L` branch.
pub const DEFAULT_EMPIRICAL_BUDGET: usize = 1_000_000;

const EMPIRICAL_SALT: u64 = 0x4c5f_656d_7069_7269;
const PARALLEL_CHUNK: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),
    #[error("invalid parameter `{name}` for `{law}`: {reason}")]
    InvalidParameter {
        law: String,
        name: String,
        reason: String,
    },
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("empirical sample budget must be positive")]
    EmptyBudget,
    #[error("truncation level must be positive, got {0}")]
    NonPositiveLevel(f64),
    #[error("no analytic truncated moment registered for ({law}, {transform})")]
    NoAnalyticMoment { law: String, transform: String },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid must be positive and strictly increasing")]
    BadGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Law {
    Rademacher,
    Normal { sd: f64 },
    SquareTail,
    Bernoulli { p: f64 },
    PointMass { value: f64 },
}

/// A validated law from the registry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    law: Law,
}

impl DistributionSpec {
    pub fn rademacher() -> Self {
        Self { law: Law::Rademacher }
    }

    pub fn standard_normal() -> Self {
        Self {
            law: Law::Normal { sd: 1.0 },
        }
    }

    pub fn square_tail() -> Self {
        Self { law: Law::SquareTail }
    }

    pub fn new(law: Law) -> Result<Self, DistributionError> {
        let bad = |name: &str, reason: &str| DistributionError::InvalidParameter {
            law: Self { law }.name().to_string(),
            name: name.to_string(),
            reason: reason.to_string(),
        };
        match law {
            Law::Normal { sd } if !(sd.is_finite() && sd > 0.0) => {
                return Err(bad("sd", "must be finite and positive"))
            }
            Law::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                return Err(bad("p", "must lie in [0, 1]"))
            }
            Law::PointMass { value } if !value.is_finite() => {
                return Err(bad("value", "must be finite"))
            }
            _ => {}
        }
        Ok(Self { law })
    }

    /// Registry lookup by name and parameter map.
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self, DistributionError> {
        let allowed: &[&str] = match name {
            "rademacher" => &[],
            "normal" => &["sd"],
            "square_tail" => &[],
            "bernoulli" => &["p"],
            "point_mass" => &["value"],
            other => return Err(DistributionError::UnknownDistribution(other.to_string())),
        };
        if let Some(key) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(DistributionError::InvalidParameter {
                law: name.to_string(),
                name: key.clone(),
                reason: "unknown parameter".to_string(),
            });
        }
        let get = |k: &str, default: Option<f64>| {
            params
                .get(k)
                .copied()
                .or(default)
                .ok_or_else(|| DistributionError::InvalidParameter {
                    law: name.to_string(),
                    name: k.to_string(),
                    reason: "required".to_string(),
                })
        };
        let law = match name {
            "rademacher" => Law::Rademacher,
            "normal" => Law::Normal {
                sd: get("sd", Some(1.0))?,
            },
            "square_tail" => Law::SquareTail,
            "bernoulli" => Law::Bernoulli { p: get("p", None)? },
            _ => Law::PointMass {
                value: get("value", None)?,
            },
        };
        Self::new(law)
    }

    pub fn law(&self) -> Law {
        self.law
    }

    pub fn name(&self) -> &'static str {
        match self.law {
            Law::Rademacher => "rademacher",
            Law::Normal { .. } => "normal",
            Law::SquareTail => "square_tail",
            Law::Bernoulli { .. } => "bernoulli",
            Law::PointMass { .. } => "point_mass",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match self.law {
            Law::Normal { sd } => {
                m.insert("sd".to_string(), sd);
            }
            Law::Bernoulli { p } => {
                m.insert("p".to_string(), p);
            }
            Law::PointMass { value } => {
                m.insert("value".to_string(), value);
            }
            Law::Rademacher | Law::SquareTail => {}
        }
        m
    }

    pub fn support_description(&self) -> String {
        match self.law {
            Law::Rademacher => "{-1, +1}".to_string(),
            Law::Normal { .. } => "real line".to_string(),
            Law::SquareTail => "|x| >= 1".to_string(),
            Law::Bernoulli { .. } => "{0, 1}".to_string(),
            Law::PointMass { value } => format!("{{{value}}}"),
        }
    }

    /// X and -X have the same law.
    pub fn is_symmetric(&self) -> bool {
        match self.law {
            Law::Rademacher | Law::Normal { .. } | Law::SquareTail => true,
            Law::Bernoulli { .. } => false,
            Law::PointMass { value } => value == 0.0,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self.law {
            Law::Bernoulli { .. } => true,
            Law::PointMass { value } => value >= 0.0,
            _ => false,
        }
    }

    /// Atoms `(value, probability)` for finite-support laws.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self.law {
            Law::Rademacher => Some(vec![(-1.0, 0.5), (1.0, 0.5)]),
            Law::Bernoulli { p } => Some(vec![(0.0, 1.0 - p), (1.0, p)]),
            Law::PointMass { value } => Some(vec![(value, 1.0)]),
            Law::Normal { .. } | Law::SquareTail => None,
        }
    }

    /// Draw `index` of the stream `key`.
    #[inline]
    pub fn draw(&self, key: &StreamKey, index: u64) -> f64 {
        let mut rng = key.draw(index);
        match self.law {
            Law::Rademacher => {
                if rng.next_u64() >> 63 == 0 {
                    -1.0
                } else {
                    1.0
                }
            }
            Law::Normal { sd } => {
                let z: f64 = rng.sample(StandardNormal);
                sd * z
            }
            Law::SquareTail => {
                // P(|X| > t) = t^-2 on t >= 1, so |X| = U^(-1/2).
                let w = rng.next_u64();
                let magnitude = 1.0 / open_unit(w).sqrt();
                if w & 1 == 0 {
                    -magnitude
                } else {
                    magnitude
                }
            }
            Law::Bernoulli { p } => {
                if open_unit(rng.next_u64()) <= p && p > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Law::PointMass { value } => value,
        }
    }

    /// Fills `out` with draws `start, start + 1, ...` of stream `key`.
    pub fn fill(&self, key: &StreamKey, start: u64, out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.draw(key, start + i as u64);
        }
    }

    /// `has_analytic_L` for the pair `(self, g)`.
    pub fn has_analytic_moment(&self, g: &Transform) -> bool {
        analytic_truncated_moment(self, g, 1.0, 2).is_some()
    }
}

/// `n` i.i.d. draws from stream 0 of `seed`.
pub fn sample_iid(dist: &DistributionSpec, n: usize, seed: u64) -> Result<Vec<f64>, DistributionError> {
    sample_stream(dist, &StreamKey::new(seed, 0), n)
}

pub fn sample_stream(dist: &DistributionSpec, key: &StreamKey, n: usize) -> Result<Vec<f64>, DistributionError> {
    if n == 0 {
        return Err(DistributionError::EmptySample);
    }
    let mut out = vec![0.0; n];
    dist.fill(key, 0, &mut out);
    Ok(out)
}

/// Same output as [`sample_iid`], generated in chunks on `workers` threads.
pub fn sample_iid_parallel(
    dist: &DistributionSpec,
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<f64>, DistributionError> {
    if n == 0 {
        return Err(DistributionError::EmptySample);
    }
    let key = StreamKey::new(seed, 0);
    let mut out = vec![0.0; n];
    crate::parallel::with_workers(workers, || {
        out.par_chunks_mut(PARALLEL_CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| dist.fill(&key, (c * PARALLEL_CHUNK) as u64, chunk));
    });
    Ok(out)
}

/// Standard normal density.
fn phi(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// `E Z^k 1{|Z| <= a}` for standard normal `Z` and `a >= 0`.
pub fn normal_truncated_moment(k: u32, a: f64) -> f64 {
    if k % 2 == 1 || a <= 0.0 {
        return 0.0;
    }
    if a.is_infinite() {
        // (k - 1)!!
        return (1..k).step_by(2).map(f64::from).product();
    }
    if a < 1.0 {
        // 2 phi(0) sum_j (-1/2)^j a^(k+2j+1) / (j! (k+2j+1))
        let mut term = 1.0;
        let mut total = 0.0;
        for j in 0..60 {
            let contrib = term * a.powi((k + 2 * j + 1) as i32) / f64::from(k + 2 * j + 1);
            total += contrib;
            if contrib.abs() < 1e-18 * total.abs() {
                break;
            }
            term *= -0.5 / f64::from(j + 1);
        }
        return 2.0 * total / (2.0 * PI).sqrt();
    }
    // M_0 = erf(a / sqrt 2); M_k = (k - 1) M_{k-2} - 2 a^(k-1) phi(a)
    let mut m = erf(a * FRAC_1_SQRT_2);
    let mut j = 2;
    while j <= k {
        m = f64::from(j - 1) * m - 2.0 * a.powi(j as i32 - 1) * phi(a);
        j += 2;
    }
    m
}

/// `E |X|^k 1{1 <= |X| <= a}` for the square-tail law, even `k`.
fn square_tail_even_moment(k: u32, a: f64) -> f64 {
    if a <= 1.0 {
        return 0.0;
    }
    if k == 2 {
        2.0 * a.ln()
    } else {
        let e = f64::from(k) - 2.0;
        2.0 * (a.powf(e) - 1.0) / e
    }
}

/// `E g(X)^q 1{|g(X)| <= x}` in closed form, when registered for `(dist, g)`.
///
/// Registered pairs: any finite-support law with any transform; normal with
/// monomials and the centered square; square-tail with monomials.
pub fn analytic_truncated_moment(dist: &DistributionSpec, g: &Transform, x: f64, q: u32) -> Option<f64> {
    if let Some(atoms) = dist.atoms() {
        return Some(
            atoms
                .iter()
                .map(|&(v, p)| {
                    let gv = g.eval(v);
                    if gv.abs() <= x {
                        p * gv.powi(q as i32)
                    } else {
                        0.0
                    }
                })
                .sum(),
        );
    }
    match (dist.law(), g.monomial_power()) {
        (Law::Normal { sd }, Some(p)) => {
            let a = x.powf(1.0 / f64::from(p)) / sd;
            let k = p * q;
            Some(sd.powi(k as i32) * normal_truncated_moment(k, a))
        }
        (Law::SquareTail, Some(p)) => {
            let k = p * q;
            if k % 2 == 1 {
                Some(0.0)
            } else {
                Some(square_tail_even_moment(k, x.powf(1.0 / f64::from(p))))
            }
        }
        (Law::Normal { sd }, None) if *g == Transform::CenteredSquare => {
            // ((sd^2 Z^2 - 1) / sqrt 2)^q expanded in powers of Z^2, over the
            // shell sd^2 Z^2 in [1 - sqrt2 x, 1 + sqrt2 x].
            let upper = ((1.0 + SQRT_2 * x).sqrt()) / sd;
            let lower = if SQRT_2 * x < 1.0 {
                (1.0 - SQRT_2 * x).sqrt() / sd
            } else {
                0.0
            };
            let mut total = 0.0;
            let mut binom = 1.0;
            for j in 0..=q {
                // C(q, j) (sd^2)^j (-1)^(q-j) Z^(2j)
                let sign = if (q - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                let coeff = binom * sd.powi(2 * j as i32) * sign;
                let shell = normal_truncated_moment(2 * j, upper) - normal_truncated_moment(2 * j, lower);
                total += coeff * shell;
                binom *= f64::from(q - j) / f64::from(j + 1);
            }
            Some(total / SQRT_2.powi(q as i32))
        }
        _ => None,
    }
}

/// How [`truncated_second_moment`] evaluates `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentMethod {
    /// Closed form when registered, otherwise plug-in average.
    Auto { budget: usize, seed: u64 },
    Analytic,
    Empirical { budget: usize, seed: u64 },
}

impl Default for MomentMethod {
    fn default() -> Self {
        MomentMethod::Auto {
            budget: DEFAULT_EMPIRICAL_BUDGET,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    /// Zero for the analytic branch.
    pub std_error: f64,
    pub analytic: bool,
}

/// Plug-in estimate of `L` from a fixed sample, evaluable at any level in
/// `O(log budget)`.
#[derive(Debug, Clone)]
pub struct EmpiricalMoment {
    abs_sorted: Vec<f64>,
    // prefix sums of g^2 and g^4 in the order of abs_sorted
    prefix_sq: Vec<f64>,
    prefix_fourth: Vec<f64>,
    budget: usize,
}

impl EmpiricalMoment {
    pub fn new(dist: &DistributionSpec, g: &Transform, budget: usize, seed: u64) -> Result<Self, DistributionError> {
        if budget == 0 {
            return Err(DistributionError::EmptyBudget);
        }
        let key = StreamKey::salted(seed, EMPIRICAL_SALT, 0);
        let mut values: Vec<f64> = (0..budget as u64).map(|i| g.eval(dist.draw(&key, i))).collect();
        values.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        let mut prefix_sq = Vec::with_capacity(budget + 1);
        let mut prefix_fourth = Vec::with_capacity(budget + 1);
        let (mut s2, mut s4) = (crate::sum::CompensatedSum::new(), crate::sum::CompensatedSum::new());
        prefix_sq.push(0.0);
        prefix_fourth.push(0.0);
        for v in &values {
            s2.add(v * v);
            s4.add(v * v * v * v);
            prefix_sq.push(s2.value());
            prefix_fourth.push(s4.value());
        }
        Ok(Self {
            abs_sorted: values.iter().map(|v| v.abs()).collect(),
            prefix_sq,
            prefix_fourth,
            budget,
        })
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    fn count_at_most(&self, x: f64) -> usize {
        self.abs_sorted.partition_point(|&v| v <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.prefix_sq[self.count_at_most(x)] / self.budget as f64
    }

    pub fn estimate(&self, x: f64) -> MomentEstimate {
        let k = self.count_at_most(x);
        let n = self.budget as f64;
        let mean = self.prefix_sq[k] / n;
        let second = self.prefix_fourth[k] / n;
        let var = (second - mean * mean).max(0.0);
        MomentEstimate {
            value: mean,
            std_error: (var / n).sqrt(),
            analytic: false,
        }
    }

    /// Largest observed `|g|`; `L` is constant beyond it.
    pub fn max_abs(&self) -> f64 {
        self.abs_sorted.last().copied().unwrap_or(0.0)
    }
}

/// A resolved truncated second-moment function `x -> L(x)`.
#[derive(Debug, Clone)]
pub enum SecondMoment {
    Analytic { dist: DistributionSpec, g: Transform },
    Empirical(EmpiricalMoment),
}

impl SecondMoment {
    pub fn resolve(dist: &DistributionSpec, g: &Transform, method: MomentMethod) -> Result<Self, DistributionError> {
        let analytic = || {
            if dist.has_analytic_moment(g) {
                Ok(SecondMoment::Analytic { dist: *dist, g: g.clone() })
            } else {
                Err(DistributionError::NoAnalyticMoment {
                    law: dist.name().to_string(),
                    transform: g.name(),
                })
            }
        };
        match method {
            MomentMethod::Analytic => analytic(),
            MomentMethod::Auto { budget, seed } => {
                analytic().or_else(|_| Ok(SecondMoment::Empirical(EmpiricalMoment::new(dist, g, budget, seed)?)))
            }
            MomentMethod::Empirical { budget, seed } => {
                Ok(SecondMoment::Empirical(EmpiricalMoment::new(dist, g, budget, seed)?))
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SecondMoment::Analytic { dist, g } => {
                analytic_truncated_moment(dist, g, x, 2).expect("resolved as analytic")
            }
            SecondMoment::Empirical(e) => e.eval(x),
        }
    }

    pub fn estimate(&self, x: f64) -> MomentEstimate {
        match self {
            SecondMoment::Analytic { .. } => MomentEstimate {
                value: self.eval(x),
                std_error: 0.0,
                analytic: true,
            },
            SecondMoment::Empirical(e) => e.estimate(x),
        }
    }

    /// Whether `L` has jumps (atoms of `|g(X)|`), in which case the identity
    /// `n L(z) = x^2 z^2` need not hold at the truncation level.
    pub fn has_atoms(&self) -> bool {
        match self {
            SecondMoment::Analytic { dist, .. } => dist.atoms().is_some(),
            SecondMoment::Empirical(_) => true,
        }
    }

    pub fn is_empirical(&self) -> bool {
        matches!(self, SecondMoment::Empirical(_))
    }
}

/// `L(x)` for `(dist, g)` at level `x > 0`.
pub fn truncated_second_moment(
    dist: &DistributionSpec,
    g: &Transform,
    x: f64,
    method: MomentMethod,
) -> Result<MomentEstimate, DistributionError> {
    if x.is_nan() || x <= 0.0 {
        return Err(DistributionError::NonPositiveLevel(x));
    }
    Ok(SecondMoment::resolve(dist, g, method)?.estimate(x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowVariationRow {
    pub x: f64,
    pub l_x: f64,
    pub l_2x: f64,
    /// `L(2x) / L(x)`; absent where `L(x) = 0`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowVariationReport {
    pub rows: Vec<SlowVariationRow>,
    pub tolerance: f64,
    /// `|L(2x)/L(x) - 1| <= tolerance` at the largest grid point.
    pub slowly_varying: bool,
}

pub const DEFAULT_SLOW_VARIATION_TOLERANCE: f64 = 0.05;

/// Ratios `L(2x)/L(x)` along an increasing positive grid.
pub fn slow_variation_diagnostic(
    moment: &SecondMoment,
    x_grid: &[f64],
    tolerance: f64,
) -> Result<SlowVariationReport, DistributionError> {
    if x_grid.is_empty() {
        return Err(DistributionError::EmptyGrid);
    }
    if x_grid[0] <= 0.0 || x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DistributionError::BadGrid);
    }
    let rows: Vec<SlowVariationRow> = x_grid
        .iter()
        .map(|&x| {
            let l_x = moment.eval(x);
            let l_2x = moment.eval(2.0 * x);
            SlowVariationRow {
                x,
                l_x,
                l_2x,
                ratio: (l_x > 0.0).then(|| l_2x / l_x),
            }
        })
        .collect();
    let slowly_varying = rows
        .last()
        .and_then(|r| r.ratio)
        .is_some_and(|r| (r - 1.0).abs() <= tolerance);
    Ok(SlowVariationReport {
        rows,
        tolerance,
        slowly_varying,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn registry_rejects_bad_input() {
        assert!(matches!(
            DistributionSpec::from_name("cauchy", &BTreeMap::new()),
            Err(DistributionError::UnknownDistribution(_))
        ));
        assert!(DistributionSpec::from_name("normal", &params(&[("sd", -1.0)])).is_err());
        assert!(DistributionSpec::from_name("normal", &params(&[("mu", 0.0)])).is_err());
        assert!(DistributionSpec::from_name("bernoulli", &BTreeMap::new()).is_err());
        let b = DistributionSpec::from_name("bernoulli", &params(&[("p", 0.5)])).unwrap();
        assert_eq!(b.params(), params(&[("p", 0.5)]));
    }

    #[test]
    fn rademacher_support() {
        let xs = sample_iid(&DistributionSpec::rademacher(), 4, 7).unwrap();
        assert_eq!(xs.len(), 4);
        assert!(xs.iter().all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn zero_length_sample_is_an_error() {
        assert_eq!(
            sample_iid(&DistributionSpec::rademacher(), 0, 1),
            Err(DistributionError::EmptySample)
        );
    }

    #[test]
    fn parallel_fill_matches_sequential() {
        let d = DistributionSpec::standard_normal();
        let a = sample_iid(&d, 100_003, 9).unwrap();
        for w in [1, 3, 8] {
            let b = sample_iid_parallel(&d, 100_003, 9, w).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn small_level_series_matches_recursion() {
        // both branches agree across the switch point
        for k in [0, 2, 4, 6] {
            let below = normal_truncated_moment(k, 1.0 - 1e-12);
            let at = normal_truncated_moment(k, 1.0);
            assert!((below - at).abs() < 1e-11, "k={k}: {below} vs {at}");
        }
        assert!((normal_truncated_moment(4, f64::INFINITY) - 3.0).abs() < 1e-15);
        assert!((normal_truncated_moment(6, 40.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn level_must_be_positive() {
        let d = DistributionSpec::rademacher();
        assert!(matches!(
            truncated_second_moment(&d, &Transform::Identity, 0.0, MomentMethod::Analytic),
            Err(DistributionError::NonPositiveLevel(_))
        ));
        assert_eq!(
            truncated_second_moment(
                &d,
                &Transform::Identity,
                1.0,
                MomentMethod::Empirical { budget: 0, seed: 0 }
            ),
            Err(DistributionError::EmptyBudget)
        );
    }

    #[test]
    fn analytic_lookup_fails_for_unregistered_pair() {
        let d = DistributionSpec::square_tail();
        let g = Transform::CenteredSquare;
        assert!(!d.has_analytic_moment(&g));
        let auto = SecondMoment::resolve(&d, &g, MomentMethod::Auto { budget: 1000, seed: 1 }).unwrap();
        assert!(auto.is_empirical());
    }

    #[test]
    fn slow_variation_rejects_bad_grids() {
        let m = SecondMoment::resolve(&DistributionSpec::rademacher(), &Transform::Identity, MomentMethod::Analytic)
            .unwrap();
        assert_eq!(slow_variation_diagnostic(&m, &[], 0.05), Err(DistributionError::EmptyGrid));
        assert_eq!(slow_variation_diagnostic(&m, &[2.0, 1.0], 0.05), Err(DistributionError::BadGrid));
        let r = slow_variation_diagnostic(&m, &[0.5, 2.0], 0.05).unwrap();
        assert_eq!(r.rows[0].ratio, None);
        assert!(r.slowly_varying);
    }
}
