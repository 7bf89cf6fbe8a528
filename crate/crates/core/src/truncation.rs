//! Truncation levels
//!
//! ```text
//! b   = inf { x >= 1 : L(x) > 0 }
//! z_n = inf { s >= b + 1 : L(s) / s^2 <= x_n^2 / n }
//! ```
//!
//! The predicate is evaluated as `n L(s) <= x_n^2 s^2`, which is exact for
//! integer `n` and flat `L`. The solver assumes `L(s)/s^2` is eventually
//! strictly decreasing. For empirical `L` (a step function) it first locates
//! the last grid point where the predicate fails on a log-spaced grid, so the
//! returned level has the predicate holding on the whole grid beyond it.

use serde::Serialize;
use thiserror::Error;

use crate::distributions::{DistributionError, DistributionSpec, MomentMethod, SecondMoment};
use crate::kernels::{KernelSpec, Transform};

pub const B_TOLERANCE: f64 = 1e-9;
pub const Z_RELATIVE_TOLERANCE: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 256;
const B_MAX_PROBE: f64 = 1.8446744073709552e19; // 2^64
const ENVELOPE_STEP: f64 = 1.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TruncationError {
    #[error("n must be at least 2, got {0}")]
    SampleTooSmall(u64),
    #[error("x_n must be finite and positive, got {0}")]
    NonPositiveDeviation(f64),
    #[error("x_n^2 = {x_sq} must be below n = {n}")]
    DeviationTooLarge { x_sq: f64, n: u64 },
    #[error("L vanishes on [1, {probed:e}]: component is almost surely null")]
    DegenerateComponent { probed: f64 },
    #[error("solver did not converge after {iterations} iterations (bracket [{lo}, {hi}])")]
    NonConvergence { iterations: usize, lo: f64, hi: f64 },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

fn check_inputs(n: u64, x_n: f64) -> Result<(), TruncationError> {
    if n < 2 {
        return Err(TruncationError::SampleTooSmall(n));
    }
    if !(x_n.is_finite() && x_n > 0.0) {
        return Err(TruncationError::NonPositiveDeviation(x_n));
    }
    if x_n * x_n >= n as f64 {
        return Err(TruncationError::DeviationTooLarge { x_sq: x_n * x_n, n });
    }
    Ok(())
}

/// Smallest `x >= 1` with `L(x) > 0`, to absolute tolerance [`B_TOLERANCE`].
pub fn compute_b_for(moment: &SecondMoment) -> Result<f64, TruncationError> {
    if moment.eval(1.0) > 0.0 {
        return Ok(1.0);
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while moment.eval(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > B_MAX_PROBE {
            return Err(TruncationError::DegenerateComponent { probed: lo });
        }
    }
    for _ in 0..MAX_ITERATIONS {
        if hi - lo <= B_TOLERANCE {
            return Ok(hi);
        }
        let mid = 0.5 * (lo + hi);
        if moment.eval(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(TruncationError::NonConvergence {
        iterations: MAX_ITERATIONS,
        lo,
        hi,
    })
}

pub fn compute_b(dist: &DistributionSpec, g: &Transform, method: MomentMethod) -> Result<f64, TruncationError> {
    compute_b_for(&SecondMoment::resolve(dist, g, method)?)
}

/// `z_{n}` for the truncated second moment `moment` with offset `b`.
pub fn compute_z_for(moment: &SecondMoment, b: f64, n: u64, x_n: f64) -> Result<f64, TruncationError> {
    check_inputs(n, x_n)?;
    let nf = n as f64;
    let x_sq = x_n * x_n;
    let pred = |s: f64| nf * moment.eval(s) <= x_sq * s * s;
    let floor = b + 1.0;
    if pred(floor) {
        return Ok(floor);
    }

    let (mut lo, mut hi) = match moment {
        SecondMoment::Empirical(e) => envelope_bracket(moment, floor, e.max_abs(), nf, x_n, pred)?,
        SecondMoment::Analytic { .. } => doubling_bracket(floor, pred)?,
    };

    let mut iterations = 0;
    while hi - lo > Z_RELATIVE_TOLERANCE * hi {
        if iterations == MAX_ITERATIONS {
            return Err(TruncationError::NonConvergence { iterations, lo, hi });
        }
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }

    // Where L is flat across the bracket the root is sqrt(n L) / x_n exactly.
    let level = moment.eval(hi);
    let exact = (nf * level).sqrt() / x_n;
    if exact >= lo && exact <= hi && exact >= floor && moment.eval(exact) == level && pred(exact) {
        return Ok(exact);
    }
    Ok(hi)
}

fn doubling_bracket(floor: f64, pred: impl Fn(f64) -> bool) -> Result<(f64, f64), TruncationError> {
    let mut lo = floor;
    let mut hi = 2.0 * floor;
    for _ in 0..MAX_ITERATIONS {
        if pred(hi) {
            return Ok((lo, hi));
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(TruncationError::NonConvergence {
        iterations: MAX_ITERATIONS,
        lo,
        hi,
    })
}

/// Bracket around the last failure of `pred` on a log-spaced grid that runs
/// past the point where the step function `L` is constant and the predicate
/// holds for good.
fn envelope_bracket(
    moment: &SecondMoment,
    floor: f64,
    max_abs: f64,
    nf: f64,
    x_n: f64,
    pred: impl Fn(f64) -> bool,
) -> Result<(f64, f64), TruncationError> {
    let l_max = moment.eval(f64::INFINITY);
    let cap = ENVELOPE_STEP * max_abs.max((nf * l_max).sqrt() / x_n).max(floor);
    let mut grid = vec![floor];
    while *grid.last().expect("nonempty") < cap {
        let next = grid.last().expect("nonempty") * ENVELOPE_STEP;
        grid.push(next);
    }
    match grid.iter().rposition(|&s| !pred(s)) {
        Some(i) if i + 1 < grid.len() => Ok((grid[i], grid[i + 1])),
        Some(i) => Err(TruncationError::NonConvergence {
            iterations: grid.len(),
            lo: grid[i],
            hi: cap,
        }),
        None => Ok((floor, floor)),
    }
}

pub fn compute_z(
    dist: &DistributionSpec,
    g: &Transform,
    n: u64,
    x_n: f64,
    method: MomentMethod,
) -> Result<f64, TruncationError> {
    check_inputs(n, x_n)?;
    let moment = SecondMoment::resolve(dist, g, method)?;
    let b = compute_b_for(&moment)?;
    compute_z_for(&moment, b, n, x_n)
}

/// `|n L(z) - x_n^2 z^2| / (x_n^2 z^2)`.
pub fn identity_residual(l_at_z: f64, z: f64, n: u64, x_n: f64) -> f64 {
    let target = x_n * x_n * z * z;
    (n as f64 * l_at_z - target).abs() / target
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationEntry {
    pub component: usize,
    pub b: f64,
    pub z: f64,
    pub l_at_z: f64,
    pub residual: f64,
    /// `L` has jumps, so the residual is informational only.
    pub atomic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationTable {
    pub n: u64,
    pub x_n: f64,
    pub entries: Vec<TruncationEntry>,
}

pub fn truncation_table(
    k: &KernelSpec,
    dist: &DistributionSpec,
    n: u64,
    x_n: f64,
    method: MomentMethod,
) -> Result<TruncationTable, TruncationError> {
    check_inputs(n, x_n)?;
    let entries = k
        .components()
        .iter()
        .enumerate()
        .map(|(component, c)| {
            let moment = SecondMoment::resolve(dist, &c.transform, method)?;
            let b = compute_b_for(&moment)?;
            let z = compute_z_for(&moment, b, n, x_n)?;
            let l_at_z = moment.eval(z);
            Ok(TruncationEntry {
                component,
                b,
                z,
                l_at_z,
                residual: identity_residual(l_at_z, z, n, x_n),
                atomic: moment.has_atoms(),
            })
        })
        .collect::<Result<Vec<_>, TruncationError>>()?;
    Ok(TruncationTable { n, x_n, entries })
}
