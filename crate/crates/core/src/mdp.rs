//! Monte Carlo estimation of `P(W_n >= x_n^2)` and of the log-rate
//! `log p / x_n^2`, whose limit along `x_n -> inf`, `x_n = o(sqrt n)` is `-1/2`.
//!
//! Replication `r` draws its sample from stream `(seed, r)`. Replications are
//! grouped in fixed chunks whose integer hit counts are reduced in chunk
//! order, so estimates are bitwise identical for any worker count. A grid of
//! deviations shares the same replications.
//!
//! For a single-component kernel `W_n = Y^2/V^2 - 1`, so `W_n >= x^2` iff
//! `|S_n|/V_n >= sqrt(1 + x^2)` for the self-normalized sum of `g(X_i)`. The
//! reduction oracle simulates that event directly on independent streams,
//! without touching the kernel or statistic code.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::distributions::DistributionSpec;
use crate::kernels::{KernelSpec, Transform};
use crate::parallel::with_workers;
use crate::rng::StreamKey;
use crate::statistics::ComponentSums;

pub const MIN_REPS: u64 = 1_000;
const CHUNK: u64 = 512;
const ORACLE_SALT: u64 = 0x6d64_705f_6f72_6163;
const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("need at least {MIN_REPS} replications, got {0}")]
    TooFewReps(u64),
    #[error("n must be at least 2, got {0}")]
    SampleTooSmall(u64),
    #[error("x_n must be finite and positive, got {0}")]
    InvalidDeviation(f64),
    #[error("x_n^2 = {x_sq} must be below n = {n}")]
    DeviationTooLarge { x_sq: f64, n: u64 },
    #[error("deviation grid is empty")]
    EmptyGrid,
    #[error("deviation grid must be strictly increasing")]
    GridNotIncreasing,
    #[error("every replication had a zero self-normalizer ({0} replications)")]
    AllZeroNormalizer(u64),
}

/// Confidence band construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMethod {
    /// `p +- 1.96 SE`, half-width at least `1/reps`.
    #[default]
    Normal,
    /// Clopper-Pearson.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailOptions {
    pub workers: usize,
    pub band: BandMethod,
    /// Attach the reduction oracle in [`rate_curve`] when the kernel allows it.
    pub oracle: bool,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            band: BandMethod::Normal,
            oracle: true,
        }
    }
}

/// Raw counts of `W_n >= t` over replications, one entry per threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExceedanceCounts {
    pub reps: u64,
    /// Replications with a positive normalizer.
    pub valid: u64,
    pub zero_normalizer: u64,
    pub hits: Vec<u64>,
}

impl ExceedanceCounts {
    fn empty(thresholds: usize) -> Self {
        Self {
            reps: 0,
            valid: 0,
            zero_normalizer: 0,
            hits: vec![0; thresholds],
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        self.reps += other.reps;
        self.valid += other.valid;
        self.zero_normalizer += other.zero_normalizer;
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        self
    }
}

fn chunk_ranges(reps: u64) -> Vec<(u64, u64)> {
    (0..reps.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(reps)))
        .collect()
}

/// Counts `W_n >= t` for each threshold `t` over `reps` replications.
///
/// Thresholds are raw values of `W_n`, not deviations; any real is allowed.
pub fn count_exceedances(
    dist: &DistributionSpec,
    k: &KernelSpec,
    n: u64,
    thresholds: &[f64],
    reps: u64,
    seed: u64,
    workers: usize,
) -> Result<ExceedanceCounts, MdpError> {
    if n < 2 {
        return Err(MdpError::SampleTooSmall(n));
    }
    let chunks = chunk_ranges(reps);
    let partial: Vec<ExceedanceCounts> = with_workers(workers, || {
        chunks
            .par_iter()
            .map(|&(start, end)| {
                let mut out = ExceedanceCounts::empty(thresholds.len());
                let mut buf = vec![0.0; n as usize];
                let mut sums = ComponentSums::new(k.len());
                for r in start..end {
                    let key = StreamKey::new(seed, r);
                    dist.fill(&key, 0, &mut buf);
                    sums.reset();
                    sums.extend(k, &buf);
                    out.reps += 1;
                    match sums.w(k) {
                        Some(w) => {
                            out.valid += 1;
                            for (h, &t) in out.hits.iter_mut().zip(thresholds) {
                                if w >= t {
                                    *h += 1;
                                }
                            }
                        }
                        None => out.zero_normalizer += 1,
                    }
                }
                out
            })
            .collect()
    });
    Ok(partial
        .iter()
        .fold(ExceedanceCounts::empty(thresholds.len()), |acc, c| acc.merge(c)))
}

/// One point of the tail curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub n: u64,
    pub x_n: f64,
    pub reps: u64,
    /// Replications with a positive normalizer; the denominator of `p_hat`.
    pub valid: u64,
    pub zero_normalizer: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub band: BandMethod,
    /// `log p_hat / x_n^2`, only when `hits > 0`.
    pub log_rate: Option<f64>,
    /// `log((hits + 1)/(valid + 1)) / x_n^2`, only when `hits = 0`.
    pub log_rate_upper: Option<f64>,
    pub seed: u64,
}

impl TailEstimate {
    pub fn upper_bound_only(&self) -> bool {
        self.hits == 0
    }

    fn from_counts(
        n: u64,
        x_n: f64,
        hits: u64,
        counts: &ExceedanceCounts,
        band: BandMethod,
        seed: u64,
    ) -> Result<Self, MdpError> {
        let valid = counts.valid;
        if valid == 0 {
            return Err(MdpError::AllZeroNormalizer(counts.reps));
        }
        let p_hat = hits as f64 / valid as f64;
        let std_error = binomial_se(p_hat, valid);
        let (ci_low, ci_high) = confidence_band(hits, valid, band);
        let x_sq = x_n * x_n;
        let (log_rate, log_rate_upper) = if hits > 0 {
            (Some(p_hat.ln() / x_sq), None)
        } else {
            (None, Some(((hits + 1) as f64 / (valid + 1) as f64).ln() / x_sq))
        };
        Ok(Self {
            n,
            x_n,
            reps: counts.reps,
            valid,
            zero_normalizer: counts.zero_normalizer,
            hits,
            p_hat,
            std_error,
            ci_low,
            ci_high,
            band,
            log_rate,
            log_rate_upper,
            seed,
        })
    }
}

pub fn binomial_se(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// 95% band for `hits` successes out of `trials`.
pub fn confidence_band(hits: u64, trials: u64, method: BandMethod) -> (f64, f64) {
    let nf = trials as f64;
    let p = hits as f64 / nf;
    match method {
        BandMethod::Normal => {
            let half = (Z_975 * binomial_se(p, trials)).max(1.0 / nf);
            ((p - half).max(0.0), (p + half).min(1.0))
        }
        BandMethod::Exact => {
            let lo = if hits == 0 {
                0.0
            } else {
                Beta::new(hits as f64, (trials - hits + 1) as f64)
                    .map(|b| b.inverse_cdf(0.025))
                    .unwrap_or(0.0)
            };
            let hi = if hits == trials {
                1.0
            } else {
                Beta::new((hits + 1) as f64, (trials - hits) as f64)
                    .map(|b| b.inverse_cdf(0.975))
                    .unwrap_or(1.0)
            };
            (lo.min(p), hi.max(p))
        }
    }
}

fn validate(n: u64, x_grid: &[f64], reps: u64) -> Result<(), MdpError> {
    if n < 2 {
        return Err(MdpError::SampleTooSmall(n));
    }
    if reps < MIN_REPS {
        return Err(MdpError::TooFewReps(reps));
    }
    if x_grid.is_empty() {
        return Err(MdpError::EmptyGrid);
    }
    for &x in x_grid {
        if !(x.is_finite() && x > 0.0) {
            return Err(MdpError::InvalidDeviation(x));
        }
        if x * x >= n as f64 {
            return Err(MdpError::DeviationTooLarge { x_sq: x * x, n });
        }
    }
    if x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MdpError::GridNotIncreasing);
    }
    Ok(())
}

/// `P(W_n >= x_n^2)` from `reps` independent samples of size `n`.
pub fn estimate_tail(
    dist: &DistributionSpec,
    k: &KernelSpec,
    n: u64,
    x_n: f64,
    reps: u64,
    seed: u64,
    opts: &TailOptions,
) -> Result<TailEstimate, MdpError> {
    validate(n, &[x_n], reps)?;
    let counts = count_exceedances(dist, k, n, &[x_n * x_n], reps, seed, opts.workers)?;
    TailEstimate::from_counts(n, x_n, counts.hits[0], &counts, opts.band, seed)
}

/// Direct simulation of `P(|S_n|/V_n >= sqrt(1 + x^2))` for the
/// self-normalized sum of `g(X_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub x_n: f64,
    pub reps: u64,
    pub valid: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub std_error: f64,
}

pub fn self_normalized_oracle(
    dist: &DistributionSpec,
    g: &Transform,
    n: u64,
    x_grid: &[f64],
    reps: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<OracleEstimate>, MdpError> {
    validate(n, x_grid, reps)?;
    // |S|/V >= sqrt(1 + x^2)  <=>  S^2 >= (1 + x^2) V^2
    let levels: Vec<f64> = x_grid.iter().map(|x| 1.0 + x * x).collect();
    let chunks = chunk_ranges(reps);
    let partial: Vec<(u64, Vec<u64>)> = with_workers(workers, || {
        chunks
            .par_iter()
            .map(|&(start, end)| {
                let mut valid = 0;
                let mut hits = vec![0u64; levels.len()];
                for r in start..end {
                    let key = StreamKey::salted(seed, ORACLE_SALT, r);
                    let (mut s, mut v) = (0.0, 0.0);
                    for i in 0..n {
                        let y = g.eval(dist.draw(&key, i));
                        s += y;
                        v += y * y;
                    }
                    if v > 0.0 {
                        valid += 1;
                        for (h, &c) in hits.iter_mut().zip(&levels) {
                            if s * s >= c * v {
                                *h += 1;
                            }
                        }
                    }
                }
                (valid, hits)
            })
            .collect()
    });
    let mut valid = 0;
    let mut hits = vec![0u64; levels.len()];
    for (v, h) in &partial {
        valid += v;
        for (a, b) in hits.iter_mut().zip(h) {
            *a += b;
        }
    }
    if valid == 0 {
        return Err(MdpError::AllZeroNormalizer(reps));
    }
    Ok(x_grid
        .iter()
        .zip(hits)
        .map(|(&x_n, h)| {
            let p_hat = h as f64 / valid as f64;
            OracleEstimate {
                x_n,
                reps,
                valid,
                hits: h,
                p_hat,
                std_error: binomial_se(p_hat, valid),
            }
        })
        .collect())
}

/// The transform of a kernel that reduces to a self-normalized sum.
pub fn reduction_transform(k: &KernelSpec) -> Option<&Transform> {
    match k.components() {
        [c] if c.lambda > 0.0 => Some(&c.transform),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub estimate: TailEstimate,
    pub oracle: Option<OracleEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub rows: Vec<RateRow>,
}

impl RateCurve {
    /// `log p_hat / x^2` per grid point.
    pub fn log_rates(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.estimate.log_rate).collect()
    }

    /// All log-rates defined and strictly increasing along the grid.
    pub fn is_strictly_increasing(&self) -> bool {
        let rates = self.log_rates();
        rates.iter().all(Option::is_some) && rates.windows(2).all(|w| w[1] > w[0])
    }
}

/// Tail estimates along an increasing deviation grid, sharing replications.
pub fn rate_curve(
    dist: &DistributionSpec,
    k: &KernelSpec,
    n: u64,
    x_grid: &[f64],
    reps: u64,
    seed: u64,
    opts: &TailOptions,
) -> Result<RateCurve, MdpError> {
    validate(n, x_grid, reps)?;
    let thresholds: Vec<f64> = x_grid.iter().map(|x| x * x).collect();
    let counts = count_exceedances(dist, k, n, &thresholds, reps, seed, opts.workers)?;
    let oracle = match (opts.oracle, reduction_transform(k)) {
        (true, Some(g)) => Some(self_normalized_oracle(dist, g, n, x_grid, reps, seed, opts.workers)?),
        _ => None,
    };
    let rows = x_grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            Ok(RateRow {
                estimate: TailEstimate::from_counts(n, x, counts.hits[i], &counts, opts.band, seed)?,
                oracle: oracle.as_ref().map(|o| o[i].clone()),
            })
        })
        .collect::<Result<Vec<_>, MdpError>>()?;
    Ok(RateCurve { n, reps, seed, rows })
}
