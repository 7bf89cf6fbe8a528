//! Audits of the exponential inequalities behind the tail bounds.
//!
//! Each auditor evaluates an explicit bound and compares it with the
//! probability it controls, computed exactly where the law allows (two-point
//! sums reduce to a binomial) and by Monte Carlo otherwise. A Monte Carlo
//! comparison is only trusted when the bound is resolvable with the given
//! number of replications.
//!
//! * lower tail of nonnegative sums: `P(sum Y_i <= x) <= exp(-(mu_n - x)^2 / (2 B_n^2))`
//! * truncated sums: `P(|sum xi_i 1{|xi_i| <= b} - E| >= v e^v n E xi^2 1{|xi| <= b} / (2b) + s b / v) <= 2 e^-s`
//! * decoupled degenerate U-statistics:
//!   `P(|sum_{i,j} h(X_i, Y_j)| > x) <= K exp(-min(x/C, (x/B)^(2/3), (x/A)^(1/2)) / K)`

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, Discrete, DiscreteCDF};
use thiserror::Error;

use crate::distributions::{analytic_truncated_moment, DistributionError, DistributionSpec};
use crate::kernels::{KernelSpec, Transform};
use crate::mdp::{binomial_se, confidence_band, BandMethod};
use crate::parallel::with_workers;
use crate::rng::StreamKey;

/// A Monte Carlo comparison needs `bound >= RESOLUTION_FACTOR / reps`.
pub const RESOLUTION_FACTOR: f64 = 50.0;
/// The truncated-sum bound `2 e^-s` needs `reps >= CLS_REPS_FACTOR e^s`.
pub const CLS_REPS_FACTOR: f64 = 100.0;
pub const DEFAULT_GLZ_K: f64 = 10.0;
const CHUNK: u64 = 512;
const CLS_SALT: u64 = 0x6175_6469_745f_636c;
const GLZ_SALT: u64 = 0x6175_6469_745f_676c;
const MOMENT_SALT: u64 = 0x6175_6469_745f_6d6f;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("{0} is not a nonnegative law")]
    NotNonnegative(String),
    #[error("bound needs 0 < x < mu_n = {mu}, got x = {x}")]
    BoundInapplicable { x: f64, mu: f64 },
    #[error("{name} must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("n must be at least 1")]
    EmptySample,
    #[error("Monte Carlo needs at least one replication")]
    NoReplications,
    #[error("component {component} is unbounded under {dist}; supply a truncation level")]
    UnboundedKernel { component: usize, dist: String },
    #[error("kernel has {expected} components but {got} truncation levels were given")]
    TruncationMismatch { expected: usize, got: usize },
    #[error("no closed-form moment for {0}")]
    NoAnalyticMoment(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

/// Replication settings shared by the Monte Carlo paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub reps: u64,
    pub seed: u64,
    pub workers: usize,
}

impl MonteCarlo {
    pub fn new(reps: u64, seed: u64) -> Self {
        Self { reps, seed, workers: 1 }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Self { workers, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub parameters: BTreeMap<String, f64>,
    pub bound_value: f64,
    pub empirical_p: f64,
    /// `None` when `empirical_p` is exact.
    pub std_error: Option<f64>,
    /// Upper end of the 95% Clopper-Pearson band; `empirical_p` when exact.
    pub upper_limit: f64,
    pub reps: Option<u64>,
    pub hits: Option<u64>,
    pub exact: bool,
    pub verdict: Verdict,
    pub satisfied: bool,
    pub note: Option<String>,
}

impl BoundReport {
    fn exact(name: &str, parameters: BTreeMap<String, f64>, bound_value: f64, p: f64) -> Self {
        let verdict = if p <= bound_value {
            Verdict::Satisfied
        } else {
            Verdict::Violated
        };
        Self {
            bound_name: name.to_owned(),
            parameters,
            bound_value,
            empirical_p: p,
            std_error: None,
            upper_limit: p,
            reps: None,
            hits: None,
            exact: true,
            verdict,
            satisfied: verdict == Verdict::Satisfied,
            note: None,
        }
    }

    fn monte_carlo(
        name: &str,
        parameters: BTreeMap<String, f64>,
        bound_value: f64,
        hits: u64,
        reps: u64,
        mut note: Option<String>,
    ) -> Self {
        let p = hits as f64 / reps as f64;
        let (low, high) = confidence_band(hits, reps, BandMethod::Exact);
        let unresolvable = bound_value < RESOLUTION_FACTOR / reps as f64;
        let verdict = if note.is_some() || unresolvable {
            Verdict::Inconclusive
        } else if high <= bound_value {
            Verdict::Satisfied
        } else if low > bound_value {
            Verdict::Violated
        } else {
            Verdict::Inconclusive
        };
        if unresolvable && note.is_none() {
            note = Some(format!(
                "bound {bound_value:e} is below {RESOLUTION_FACTOR}/reps = {:e}",
                RESOLUTION_FACTOR / reps as f64
            ));
        }
        Self {
            bound_name: name.to_owned(),
            parameters,
            bound_value,
            empirical_p: p,
            std_error: Some(binomial_se(p, reps)),
            upper_limit: high,
            reps: Some(reps),
            hits: Some(hits),
            exact: false,
            verdict,
            satisfied: verdict == Verdict::Satisfied,
            note,
        }
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_owned(), v)).collect()
}

fn positive(name: &'static str, value: f64) -> Result<f64, AuditError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(AuditError::InvalidParameter { name, value })
    }
}

/// Counts successful trials over `reps` replications in fixed chunks.
fn count_hits<F>(mc: MonteCarlo, trial: F) -> u64
where
    F: Fn(u64, &mut Vec<f64>) -> bool + Sync,
{
    let chunks: Vec<u64> = (0..mc.reps.div_ceil(CHUNK)).collect();
    with_workers(mc.workers, || {
        chunks
            .par_iter()
            .map(|&c| {
                let mut buf = Vec::new();
                (c * CHUNK..((c + 1) * CHUNK).min(mc.reps))
                    .filter(|&r| trial(r, &mut buf))
                    .count() as u64
            })
            .sum()
    })
}

/// Merges equal values and drops null atoms.
fn support(values: impl IntoIterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (v, p) in values {
        if p <= 0.0 {
            continue;
        }
        match out.iter_mut().find(|(w, _)| *w == v) {
            Some(slot) => slot.1 += p,
            None => out.push((v, p)),
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Sum of `n` draws from a law on at most two points: `base + step K`,
/// `K ~ Bin(n, p)`.
struct LatticeSum {
    base: f64,
    step: f64,
    binomial: Option<Binomial>,
    n: u64,
}

impl LatticeSum {
    fn new(atoms: &[(f64, f64)], n: u64) -> Option<Self> {
        match *atoms {
            [(v, _)] => Some(Self {
                base: n as f64 * v,
                step: 0.0,
                binomial: None,
                n,
            }),
            [(a, _), (c, pc)] => Some(Self {
                base: n as f64 * a,
                step: c - a,
                binomial: Binomial::new(pc.min(1.0), n).ok(),
                n,
            }),
            _ => None,
        }
    }

    /// `P(sum <= x)`.
    fn cdf(&self, x: f64) -> f64 {
        let Some(bin) = &self.binomial else {
            return if self.base <= x { 1.0 } else { 0.0 };
        };
        let k = ((x - self.base) / self.step).floor();
        if k < 0.0 {
            0.0
        } else if k >= self.n as f64 {
            1.0
        } else {
            bin.cdf(k as u64)
        }
    }

    /// `P(pred(sum))`, summed over the lattice.
    fn probability(&self, pred: impl Fn(f64) -> bool) -> f64 {
        let Some(bin) = &self.binomial else {
            return if pred(self.base) { 1.0 } else { 0.0 };
        };
        (0..=self.n)
            .filter(|&k| pred(self.base + self.step * k as f64))
            .map(|k| bin.pmf(k))
            .sum::<f64>()
            .min(1.0)
    }
}

/// `exp(-(mu_n - x)^2 / (2 B_n^2))`.
pub fn lower_tail_bound_value(mu_n: f64, b_n_sq: f64, x: f64) -> f64 {
    (-(mu_n - x).powi(2) / (2.0 * b_n_sq)).exp()
}

/// Lower tail of a sum of `n` i.i.d. nonnegative draws against its exact law.
pub fn lower_tail_bound(dist: &DistributionSpec, n: u64, x: f64) -> Result<BoundReport, AuditError> {
    if !dist.is_nonnegative() {
        return Err(AuditError::NotNonnegative(dist.name().to_owned()));
    }
    if n == 0 {
        return Err(AuditError::EmptySample);
    }
    let atoms = support(
        dist.atoms()
            .ok_or_else(|| AuditError::NoAnalyticMoment(format!("the sum law of {}", dist.name())))?,
    );
    let m1: f64 = atoms.iter().map(|&(v, p)| p * v).sum();
    let m2: f64 = atoms.iter().map(|&(v, p)| p * v * v).sum();
    let (mu_n, b_n_sq) = (n as f64 * m1, n as f64 * m2);
    if !(x > 0.0 && x < mu_n) {
        return Err(AuditError::BoundInapplicable { x, mu: mu_n });
    }
    let bound = lower_tail_bound_value(mu_n, b_n_sq, x);
    let law = LatticeSum::new(&atoms, n)
        .ok_or_else(|| AuditError::NoAnalyticMoment(format!("the sum law of {}", dist.name())))?;
    let p = law.cdf(x);
    Ok(BoundReport::exact(
        "lower_tail",
        params(&[("n", n as f64), ("x", x), ("mu_n", mu_n), ("b_n_sq", b_n_sq)]),
        bound,
        p,
    ))
}

/// `v e^v n L(b) / (2b) + s b / v` with `L(b) = E xi^2 1{|xi| <= b}`.
pub fn cls_threshold(n: u64, b: f64, v: f64, s: f64, l_at_b: f64) -> f64 {
    v * v.exp() * n as f64 * l_at_b / (2.0 * b) + s * b / v
}

/// `2 e^-s`.
pub fn cls_bound_value(s: f64) -> f64 {
    2.0 * (-s).exp()
}

/// Centered truncated sum of `xi = g(X)` against `2 e^-s`.
pub fn cls_truncated_bound(
    dist: &DistributionSpec,
    g: &Transform,
    n: u64,
    b: f64,
    v: f64,
    s: f64,
    mc: MonteCarlo,
) -> Result<BoundReport, AuditError> {
    if n == 0 {
        return Err(AuditError::EmptySample);
    }
    let (b, v, s) = (positive("b", b)?, positive("v", v)?, positive("s", s)?);
    let missing = || AuditError::NoAnalyticMoment(format!("E {g}(X)^q 1{{|{g}(X)| <= {b}}} under {}", dist.name()));
    let m1 = analytic_truncated_moment(dist, g, b, 1).ok_or_else(missing)?;
    let l_at_b = analytic_truncated_moment(dist, g, b, 2).ok_or_else(missing)?;
    let threshold = cls_threshold(n, b, v, s, l_at_b);
    let bound = cls_bound_value(s);
    let parameters = params(&[
        ("n", n as f64),
        ("b", b),
        ("v", v),
        ("s", s),
        ("threshold", threshold),
        ("mean_truncated", m1),
        ("l_at_b", l_at_b),
    ]);
    let center = n as f64 * m1;

    if let Some(atoms) = dist.atoms() {
        let truncated = support(atoms.iter().map(|&(x, p)| {
            let xi = g.eval(x);
            (if xi.abs() <= b { xi } else { 0.0 }, p)
        }));
        let lo = truncated.first().map_or(0.0, |a| a.0);
        let hi = truncated.last().map_or(0.0, |a| a.0);
        // Largest possible deviation of the centered sum.
        let reach = (n as f64 * hi - center).abs().max((n as f64 * lo - center).abs());
        if reach < threshold {
            return Ok(BoundReport::exact("cls_truncated", parameters, bound, 0.0));
        }
        if let Some(law) = LatticeSum::new(&truncated, n) {
            let p = law.probability(|sum| (sum - center).abs() >= threshold);
            return Ok(BoundReport::exact("cls_truncated", parameters, bound, p));
        }
    }

    if mc.reps == 0 {
        return Err(AuditError::NoReplications);
    }
    let needed = CLS_REPS_FACTOR * s.exp();
    let note = ((mc.reps as f64) < needed)
        .then(|| format!("reps = {} is below {CLS_REPS_FACTOR} e^s = {needed:.0}", mc.reps));
    let hits = count_hits(mc, |r, buf| {
        buf.resize(n as usize, 0.0);
        dist.fill(&StreamKey::salted(mc.seed, CLS_SALT, r), 0, buf);
        let sum: f64 = buf
            .iter()
            .map(|&x| {
                let xi = g.eval(x);
                if xi.abs() <= b {
                    xi
                } else {
                    0.0
                }
            })
            .sum();
        (sum - center).abs() >= threshold
    });
    Ok(BoundReport::monte_carlo("cls_truncated", parameters, bound, hits, mc.reps, note))
}

/// `A`, `B^2`, `C^2` of the centered truncated kernel over an `n x n` array.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlzMoments {
    pub a: f64,
    pub b_sq: f64,
    pub c_sq: f64,
    /// Sup norms attained on a finite support rather than bounded above.
    pub exact: bool,
}

/// Monte Carlo counterparts of `C^2` and, on finite supports, `B^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlzMomentsMc {
    pub budget: usize,
    pub c_sq: f64,
    pub c_sq_se: f64,
    pub b_sq: Option<f64>,
    pub b_sq_se: Option<f64>,
}

/// `K exp(-min(x/C, (x/B)^(2/3), (x/A)^(1/2)) / K)`.
pub fn glz_bound_value(a: f64, b: f64, c: f64, k_const: f64, x: f64) -> f64 {
    let ratio = |scale: f64| {
        if x == 0.0 {
            0.0
        } else if scale == 0.0 {
            f64::INFINITY
        } else {
            x / scale
        }
    };
    let exponent = ratio(c).min(ratio(b).powf(2.0 / 3.0)).min(ratio(a).sqrt());
    k_const * (-exponent / k_const).exp()
}

/// `g_l(x) 1{|g_l(x)| <= level} - mean`.
#[derive(Debug, Clone)]
struct Centered {
    lambda: f64,
    transform: Transform,
    level: f64,
    mean: f64,
}

impl Centered {
    #[inline]
    fn truncated(&self, x: f64) -> f64 {
        let g = self.transform.eval(x);
        if g.abs() <= self.level {
            g
        } else {
            0.0
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.truncated(x) - self.mean
    }
}

fn levels_for(k: &KernelSpec, dist: &DistributionSpec, truncation: Option<&[f64]>) -> Result<Vec<f64>, AuditError> {
    match truncation {
        Some(levels) => {
            if levels.len() != k.len() {
                return Err(AuditError::TruncationMismatch {
                    expected: k.len(),
                    got: levels.len(),
                });
            }
            for &z in levels {
                if z.is_nan() || z <= 0.0 {
                    return Err(AuditError::InvalidParameter { name: "truncation level", value: z });
                }
            }
            if dist.atoms().is_none() {
                if let Some(component) = levels.iter().position(|z| z.is_infinite()) {
                    return Err(AuditError::UnboundedKernel {
                        component,
                        dist: dist.name().to_owned(),
                    });
                }
            }
            Ok(levels.to_vec())
        }
        None if dist.atoms().is_some() => Ok(vec![f64::INFINITY; k.len()]),
        None => Err(AuditError::UnboundedKernel {
            component: 0,
            dist: dist.name().to_owned(),
        }),
    }
}

fn centered_components(
    k: &KernelSpec,
    dist: &DistributionSpec,
    truncation: Option<&[f64]>,
) -> Result<Vec<Centered>, AuditError> {
    let levels = levels_for(k, dist, truncation)?;
    k.components()
        .iter()
        .zip(levels)
        .map(|(c, level)| {
            let mean = analytic_truncated_moment(dist, &c.transform, level, 1).ok_or_else(|| {
                AuditError::NoAnalyticMoment(format!("truncated mean of {} under {}", c.transform, dist.name()))
            })?;
            Ok(Centered {
                lambda: c.lambda,
                transform: c.transform.clone(),
                level,
                mean,
            })
        })
        .collect()
}

/// `E g_l g_k 1{|g_l| <= z_l} 1{|g_k| <= z_k}` for a continuous law.
fn joint_truncated(dist: &DistributionSpec, l: &Centered, k: &Centered) -> Option<f64> {
    if l.transform == k.transform && l.level == k.level {
        return analytic_truncated_moment(dist, &l.transform, l.level, 2);
    }
    let mixed_parity = (l.transform.is_odd() && k.transform.is_even()) || (l.transform.is_even() && k.transform.is_odd());
    if dist.is_symmetric() && mixed_parity {
        return Some(0.0);
    }
    let (p, q) = (l.transform.monomial_power()?, k.transform.monomial_power()?);
    let radius = l.level.powf(1.0 / f64::from(p)).min(k.level.powf(1.0 / f64::from(q)));
    analytic_truncated_moment(dist, &Transform::Identity, radius, p + q)
}

/// `G_{lk} = E gbar_l(X) gbar_k(X)`.
fn gram(dist: &DistributionSpec, comps: &[Centered]) -> Result<Vec<Vec<f64>>, AuditError> {
    let atoms = dist.atoms();
    let mut g = vec![vec![0.0; comps.len()]; comps.len()];
    for (i, ci) in comps.iter().enumerate() {
        for (j, cj) in comps.iter().enumerate().skip(i) {
            let value = match &atoms {
                Some(atoms) => atoms.iter().map(|&(x, p)| p * ci.eval(x) * cj.eval(x)).sum(),
                None => {
                    joint_truncated(dist, ci, cj).ok_or_else(|| {
                        AuditError::NoAnalyticMoment(format!("E {} {} under {}", ci.transform, cj.transform, dist.name()))
                    })? - ci.mean * cj.mean
                }
            };
            g[i][j] = value;
            g[j][i] = value;
        }
    }
    Ok(g)
}

fn centered_kernel(comps: &[Centered], x: f64, y: f64) -> f64 {
    comps.iter().map(|c| c.lambda * c.eval(x) * c.eval(y)).sum()
}

/// `E_X h(X, y)^2 = sum_{l,k} lambda_l lambda_k G_lk gbar_l(y) gbar_k(y)`.
fn conditional_second_moment(comps: &[Centered], g: &[Vec<f64>], y: f64) -> f64 {
    let vals: Vec<f64> = comps.iter().map(|c| c.lambda * c.eval(y)).collect();
    let mut total = 0.0;
    for (i, vi) in vals.iter().enumerate() {
        for (j, vj) in vals.iter().enumerate() {
            total += g[i][j] * vi * vj;
        }
    }
    total
}

/// Analytic `A`, `B^2`, `C^2`. On a finite support the sup norms are attained
/// exactly; otherwise `A` and `B^2` are the upper bounds obtained from
/// `|gbar_l| <= z_l + |E g_l 1{|g_l| <= z_l}|`.
pub fn glz_moments(
    k: &KernelSpec,
    dist: &DistributionSpec,
    n: u64,
    truncation: Option<&[f64]>,
) -> Result<GlzMoments, AuditError> {
    let comps = centered_components(k, dist, truncation)?;
    let g = gram(dist, &comps)?;
    let nf = n as f64;
    let mut e_h2 = 0.0;
    for (i, ci) in comps.iter().enumerate() {
        for (j, cj) in comps.iter().enumerate() {
            e_h2 += ci.lambda * cj.lambda * g[i][j] * g[i][j];
        }
    }
    let c_sq = nf * nf * e_h2;
    match dist.atoms() {
        Some(atoms) => {
            let points: Vec<f64> = support(atoms).into_iter().map(|(x, _)| x).collect();
            let a = points
                .iter()
                .flat_map(|&x| points.iter().map(move |&y| (x, y)))
                .map(|(x, y)| centered_kernel(&comps, x, y).abs())
                .fold(0.0, f64::max);
            let b_sq = nf * points
                .iter()
                .map(|&y| conditional_second_moment(&comps, &g, y))
                .fold(0.0, f64::max);
            Ok(GlzMoments { a, b_sq, c_sq, exact: true })
        }
        None => {
            let sup: Vec<f64> = comps.iter().map(|c| c.level + c.mean.abs()).collect();
            let a = comps.iter().zip(&sup).map(|(c, s)| c.lambda.abs() * s * s).sum();
            let mut b_sq = 0.0;
            for (i, ci) in comps.iter().enumerate() {
                for (j, cj) in comps.iter().enumerate() {
                    b_sq += (ci.lambda * cj.lambda * g[i][j]).abs() * sup[i] * sup[j];
                }
            }
            Ok(GlzMoments {
                a,
                b_sq: nf * b_sq,
                c_sq,
                exact: false,
            })
        }
    }
}

/// `C^2` (and `B^2` on finite supports) from `budget` independent pairs, with
/// truncated means estimated on a separate stream.
pub fn glz_moments_mc(
    k: &KernelSpec,
    dist: &DistributionSpec,
    n: u64,
    truncation: Option<&[f64]>,
    budget: usize,
    seed: u64,
) -> Result<GlzMomentsMc, AuditError> {
    if budget < 2 {
        return Err(AuditError::NoReplications);
    }
    let mut comps = centered_components(k, dist, truncation)?;
    let mean_key = StreamKey::salted(seed, MOMENT_SALT, 1);
    let draws: Vec<f64> = (0..budget as u64).map(|i| dist.draw(&mean_key, i)).collect();
    for c in &mut comps {
        c.mean = draws.iter().map(|&x| c.truncated(x)).sum::<f64>() / budget as f64;
    }
    let key = StreamKey::salted(seed, MOMENT_SALT, 0);
    let nf = n as f64;
    let bf = budget as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in 0..budget as u64 {
        let h2 = centered_kernel(&comps, dist.draw(&key, 2 * i), dist.draw(&key, 2 * i + 1)).powi(2);
        s1 += h2;
        s2 += h2 * h2;
    }
    let mean = s1 / bf;
    let sd = ((s2 / bf - mean * mean).max(0.0) * bf / (bf - 1.0)).sqrt();
    let (b_sq, b_sq_se) = match dist.atoms() {
        Some(atoms) => {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for (y, _) in support(atoms) {
                let (mut t1, mut t2) = (0.0, 0.0);
                for &x in &draws {
                    let h2 = centered_kernel(&comps, x, y).powi(2);
                    t1 += h2;
                    t2 += h2 * h2;
                }
                let m = t1 / bf;
                let se = ((t2 / bf - m * m).max(0.0) / (bf - 1.0)).sqrt();
                if m > best.0 {
                    best = (m, se);
                }
            }
            (Some(nf * best.0), Some(nf * best.1))
        }
        None => (None, None),
    };
    Ok(GlzMomentsMc {
        budget,
        c_sq: nf * nf * mean,
        c_sq_se: nf * nf * sd / bf.sqrt(),
        b_sq,
        b_sq_se,
    })
}

/// Decoupled sum `sum_{i,j} h(X_i, Y_j)` over two independent samples
/// against the bound with constant `k_const`.
pub fn glz_decoupled_bound(
    k: &KernelSpec,
    dist: &DistributionSpec,
    n: u64,
    k_const: f64,
    x: f64,
    truncation: Option<&[f64]>,
    mc: MonteCarlo,
) -> Result<BoundReport, AuditError> {
    if n == 0 {
        return Err(AuditError::EmptySample);
    }
    let k_const = positive("K", k_const)?;
    if !(x.is_finite() && x >= 0.0) {
        return Err(AuditError::InvalidParameter { name: "x", value: x });
    }
    if mc.reps == 0 {
        return Err(AuditError::NoReplications);
    }
    let m = glz_moments(k, dist, n, truncation)?;
    let comps = centered_components(k, dist, truncation)?;
    let bound = glz_bound_value(m.a, m.b_sq.sqrt(), m.c_sq.sqrt(), k_const, x);
    let parameters = params(&[
        ("n", n as f64),
        ("K", k_const),
        ("x", x),
        ("A", m.a),
        ("B_sq", m.b_sq),
        ("C_sq", m.c_sq),
    ]);
    let len = n as usize;
    let hits = count_hits(mc, |r, buf| {
        buf.resize(2 * len, 0.0);
        dist.fill(&StreamKey::salted(mc.seed, GLZ_SALT, r), 0, buf);
        let (xs, ys) = buf.split_at(len);
        let total: f64 = comps
            .iter()
            .map(|c| {
                let sx = xs.iter().map(|&v| c.truncated(v)).sum::<f64>() - n as f64 * c.mean;
                let sy = ys.iter().map(|&v| c.truncated(v)).sum::<f64>() - n as f64 * c.mean;
                c.lambda * sx * sy
            })
            .sum();
        total.abs() > x
    });
    Ok(BoundReport::monte_carlo("glz_decoupled", parameters, bound, hits, mc.reps, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Law;

    fn bernoulli(p: f64) -> DistributionSpec {
        DistributionSpec::new(Law::Bernoulli { p }).unwrap()
    }

    #[test]
    fn lower_tail_examples() {
        let r = lower_tail_bound(&bernoulli(0.5), 100, 30.0).unwrap();
        assert!((r.bound_value - (-4.0f64).exp()).abs() < 1e-15);
        assert!(r.satisfied && r.exact);
        assert!(r.empirical_p < 1e-4);

        let one = DistributionSpec::new(Law::PointMass { value: 1.0 }).unwrap();
        let r = lower_tail_bound(&one, 10, 5.0).unwrap();
        assert_eq!(r.empirical_p, 0.0);
        assert!((r.bound_value - (-25.0f64 / 20.0).exp()).abs() < 1e-15);

        let near = lower_tail_bound(&bernoulli(0.5), 100, 50.0 - 1e-9).unwrap();
        assert!(near.bound_value > 1.0 - 1e-15 && near.satisfied);
    }

    #[test]
    fn lower_tail_preconditions() {
        assert!(matches!(
            lower_tail_bound(&bernoulli(0.5), 100, 50.0),
            Err(AuditError::BoundInapplicable { .. })
        ));
        assert!(matches!(
            lower_tail_bound(&DistributionSpec::rademacher(), 10, 1.0),
            Err(AuditError::NotNonnegative(_))
        ));
    }

    #[test]
    fn cls_threshold_beyond_reach() {
        let r = cls_truncated_bound(
            &DistributionSpec::rademacher(),
            &Transform::Identity,
            10,
            1.0,
            1.0,
            2.0,
            MonteCarlo::new(0, 0),
        )
        .unwrap();
        let t = r.parameters["threshold"];
        assert!((t - (5.0 * std::f64::consts::E + 2.0)).abs() < 1e-12);
        assert!(r.exact && r.empirical_p == 0.0 && r.satisfied);
    }

    #[test]
    fn cls_unresolvable_is_inconclusive() {
        let r = cls_truncated_bound(
            &DistributionSpec::standard_normal(),
            &Transform::Identity,
            50,
            2.0,
            1.0,
            8.0,
            MonteCarlo::new(2000, 1),
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(!r.satisfied);
        assert!(r.note.is_some());
    }

    #[test]
    fn glz_rademacher_moments() {
        let m = glz_moments(&KernelSpec::product(), &DistributionSpec::rademacher(), 50, None).unwrap();
        assert!(m.exact);
        assert_eq!((m.a, m.b_sq, m.c_sq), (1.0, 50.0, 2500.0));
    }

    #[test]
    fn glz_bound_edges() {
        assert_eq!(glz_bound_value(1.0, 2.0, 3.0, 10.0, 0.0), 10.0);
        let b = |k| glz_bound_value(1.0, 50f64.sqrt(), 50.0, k, 150.0);
        assert!(b(20.0) >= b(10.0));
        assert_eq!(b(10.0).to_bits(), b(10.0).to_bits());
    }

    #[test]
    fn unbounded_kernel_rejected() {
        let r = glz_decoupled_bound(
            &KernelSpec::product(),
            &DistributionSpec::standard_normal(),
            10,
            10.0,
            1.0,
            None,
            MonteCarlo::new(100, 0),
        );
        assert!(matches!(r, Err(AuditError::UnboundedKernel { .. })));
    }

    #[test]
    fn truncated_normal_glz_runs() {
        let r = glz_decoupled_bound(
            &KernelSpec::hermite_pair(1.0, 0.5).unwrap(),
            &DistributionSpec::standard_normal(),
            20,
            10.0,
            40.0,
            Some(&[3.0, 3.0]),
            MonteCarlo::new(5000, 3),
        )
        .unwrap();
        assert!(r.parameters["C_sq"] > 0.0);
        assert!(r.satisfied);
    }
}
