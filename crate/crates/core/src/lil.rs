//! Paths of `W_n / log log n` along geometric checkpoints `n_j = round(theta^j)`.
//!
//! One i.i.d. stream per seed is extended incrementally: component sums are
//! updated draw by draw and `W` is read off at each checkpoint, so a path up
//! to `n_max` costs `O(n_max m)`. The stream is draw-addressable, so the
//! prefix of length `n` equals `sample_iid(dist, n, seed)`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distributions::DistributionSpec;
use crate::kernels::KernelSpec;
use crate::parallel::with_workers;
use crate::rng::StreamKey;
use crate::statistics::ComponentSums;

/// Smallest checkpoint; `log log n` is comfortably positive from here.
pub const FIRST_CHECKPOINT: u64 = 16;
pub const DEFAULT_THETA: f64 = 1.2;
const BLOCK: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LilError {
    #[error("n_max must be at least {FIRST_CHECKPOINT}, got {0}")]
    PathTooShort(u64),
    #[error("theta must lie in (1, 2], got {0}")]
    InvalidTheta(f64),
    #[error("zero self-normalizer at checkpoint n = {n}: kernel has no weight")]
    ZeroNormalizer { n: u64 },
    #[error("no kernels given")]
    NoKernels,
}

fn validate(n_max: u64, theta: f64) -> Result<(), LilError> {
    if !(theta > 1.0 && theta <= 2.0) {
        return Err(LilError::InvalidTheta(theta));
    }
    if n_max < FIRST_CHECKPOINT {
        return Err(LilError::PathTooShort(n_max));
    }
    Ok(())
}

/// Distinct `round(theta^j) in [16, n_max]`, increasing.
pub fn checkpoints(n_max: u64, theta: f64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let mut power = 1.0_f64;
    loop {
        let n = power.round();
        if n > n_max as f64 {
            break;
        }
        let n = n as u64;
        if n >= FIRST_CHECKPOINT && out.last() != Some(&n) {
            out.push(n);
        }
        power *= theta;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub seed: u64,
    pub theta: f64,
    pub n_max: u64,
    pub checkpoints: Vec<u64>,
    /// `W_n`; `None` marks a gap (zero normalizer).
    pub w: Vec<Option<f64>>,
    /// `W_n / log log n`.
    pub ratio: Vec<Option<f64>>,
    /// Prefix maximum of `ratio` over defined entries.
    pub running_max: Vec<Option<f64>>,
}

impl PathRecord {
    pub fn gaps(&self) -> usize {
        self.w.iter().filter(|w| w.is_none()).count()
    }

    /// Largest ratio over checkpoints `n >= n_min`.
    pub fn max_ratio_from(&self, n_min: u64) -> Option<f64> {
        self.checkpoints
            .iter()
            .zip(&self.ratio)
            .filter(|(&n, _)| n >= n_min)
            .filter_map(|(_, r)| *r)
            .reduce(f64::max)
    }
}

fn log_log(n: u64) -> f64 {
    (n as f64).ln().ln()
}

/// One stream, several kernels: a path per kernel over the same draws.
pub fn simulate_paths(
    dist: &DistributionSpec,
    kernels: &[KernelSpec],
    n_max: u64,
    theta: f64,
    seed: u64,
) -> Result<Vec<PathRecord>, LilError> {
    validate(n_max, theta)?;
    if kernels.is_empty() {
        return Err(LilError::NoKernels);
    }
    let cps = checkpoints(n_max, theta);
    if let (Some(&first), true) = (cps.first(), kernels.iter().any(KernelSpec::is_null)) {
        return Err(LilError::ZeroNormalizer { n: first });
    }
    let key = StreamKey::new(seed, 0);
    let mut sums: Vec<ComponentSums> = kernels.iter().map(|k| ComponentSums::new(k.len())).collect();
    let mut values: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(cps.len()); kernels.len()];
    let mut buf = vec![0.0; BLOCK];
    let mut drawn = 0u64;
    for &n in &cps {
        while drawn < n {
            let len = ((n - drawn) as usize).min(BLOCK);
            let block = &mut buf[..len];
            dist.fill(&key, drawn, block);
            for (s, k) in sums.iter_mut().zip(kernels) {
                s.extend(k, block);
            }
            drawn += len as u64;
        }
        for ((s, k), v) in sums.iter().zip(kernels).zip(values.iter_mut()) {
            v.push(s.w(k));
        }
    }
    Ok(values
        .into_iter()
        .map(|w| {
            let ratio: Vec<Option<f64>> = w
                .iter()
                .zip(&cps)
                .map(|(w, &n)| w.map(|w| w / log_log(n)))
                .collect();
            let mut best: Option<f64> = None;
            let running_max = ratio
                .iter()
                .map(|r| {
                    if let Some(r) = *r {
                        best = Some(best.map_or(r, |b| b.max(r)));
                    }
                    best
                })
                .collect();
            PathRecord {
                seed,
                theta,
                n_max,
                checkpoints: cps.clone(),
                w,
                ratio,
                running_max,
            }
        })
        .collect())
}

pub fn simulate_path(
    dist: &DistributionSpec,
    k: &KernelSpec,
    n_max: u64,
    theta: f64,
    seed: u64,
) -> Result<PathRecord, LilError> {
    Ok(simulate_paths(dist, std::slice::from_ref(k), n_max, theta, seed)?
        .pop()
        .expect("one kernel in, one path out"))
}

/// Paths for many seeds, in seed order.
pub fn simulate_many(
    dist: &DistributionSpec,
    k: &KernelSpec,
    n_max: u64,
    theta: f64,
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<PathRecord>, LilError> {
    with_workers(workers, || {
        seeds
            .par_iter()
            .map(|&s| simulate_path(dist, k, n_max, theta, s))
            .collect()
    })
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

/// Cross-seed distribution of per-path maxima.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub paths: usize,
    pub n_min: u64,
    pub max_ratios: Vec<Option<f64>>,
    pub min: Option<f64>,
    pub q10: Option<f64>,
    pub median: Option<f64>,
    pub q90: Option<f64>,
    pub max: Option<f64>,
}

impl PathSummary {
    pub fn new(paths: &[PathRecord], n_min: u64) -> Self {
        let max_ratios: Vec<Option<f64>> = paths.iter().map(|p| p.max_ratio_from(n_min)).collect();
        let mut sorted: Vec<f64> = max_ratios.iter().flatten().copied().collect();
        sorted.sort_by(f64::total_cmp);
        Self {
            paths: paths.len(),
            n_min,
            min: sorted.first().copied(),
            q10: quantile(&sorted, 0.1),
            median: quantile(&sorted, 0.5),
            q90: quantile(&sorted, 0.9),
            max: sorted.last().copied(),
            max_ratios,
        }
    }

    /// Fraction of paths whose maximum lies in `[lo, hi]`.
    pub fn fraction_within(&self, lo: f64, hi: f64) -> f64 {
        if self.paths == 0 {
            return 0.0;
        }
        let inside = self
            .max_ratios
            .iter()
            .filter(|r| r.is_some_and(|r| (lo..=hi).contains(&r)))
            .count();
        inside as f64 / self.paths as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleRow {
    pub seed: u64,
    pub n: u64,
    pub w_product: f64,
    pub w_remark: f64,
    /// `w_remark / w_product`, when `w_product != 0`.
    pub factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub rows: Vec<CounterexampleRow>,
    /// `(product path, remark path)` per seed.
    pub paths: Vec<(PathRecord, PathRecord)>,
    pub notice: Option<String>,
}

/// Rademacher streams under the product kernel and under `x y + x^3 y^3`.
pub fn counterexample_report(
    n_max: u64,
    theta: f64,
    seeds: &[u64],
    workers: usize,
) -> Result<CounterexampleReport, LilError> {
    if !(theta > 1.0 && theta <= 2.0) {
        return Err(LilError::InvalidTheta(theta));
    }
    if n_max < FIRST_CHECKPOINT {
        return Ok(CounterexampleReport {
            rows: Vec::new(),
            paths: Vec::new(),
            notice: Some(format!(
                "n_max = {n_max} is below the first checkpoint {FIRST_CHECKPOINT}; nothing to report"
            )),
        });
    }
    let dist = DistributionSpec::rademacher();
    let kernels = [KernelSpec::product(), KernelSpec::remark()];
    let paths: Vec<(PathRecord, PathRecord)> = with_workers(workers, || {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut p = simulate_paths(&dist, &kernels, n_max, theta, seed)?;
                let remark = p.pop().expect("two paths");
                let product = p.pop().expect("two paths");
                Ok((product, remark))
            })
            .collect::<Result<Vec<_>, LilError>>()
    })?;
    let mut rows = Vec::new();
    for (product, remark) in &paths {
        for (j, &n) in product.checkpoints.iter().enumerate() {
            // V^2 = n > 0 on Rademacher input, so neither path has gaps.
            let (wp, wr) = (product.w[j].expect("no gaps"), remark.w[j].expect("no gaps"));
            rows.push(CounterexampleRow {
                seed: product.seed,
                n,
                w_product: wp,
                w_remark: wr,
                factor: (wp != 0.0).then(|| wr / wp),
            });
        }
    }
    Ok(CounterexampleReport {
        rows,
        paths,
        notice: None,
    })
}
