//! Degenerate kernels in spectral form `h(x, y) = sum_l lambda_l g_l(x) g_l(y)`
//! with finitely many components, plus numerical checks of the structural
//! conditions on `(lambda_l, g_l)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{DistributionError, DistributionSpec, MomentMethod, SecondMoment};
use crate::rng::StreamKey;
use crate::sum::CompensatedSum;
use crate::truncation::{self, TruncationError};

const DEGENERACY_SALT: u64 = 0x6b5f_6465_6765_6e00;
const ORTHOGONALITY_SALT: u64 = 0x6b5f_6f72_7468_6f00;

/// Minimum sample budget accepted by the Monte Carlo checks.
pub const MIN_CHECK_BUDGET: usize = 1_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel has no components")]
    Empty,
    #[error("component {index}: lambda must be finite and nonnegative, got {value}")]
    InvalidLambda { index: usize, value: f64 },
    #[error("unknown transform `{0}`")]
    UnknownTransform(String),
    #[error("check budget {0} is below the minimum of {MIN_CHECK_BUDGET}")]
    BudgetTooSmall(usize),
    #[error("probe grid is empty")]
    EmptyGrid,
    #[error("every probe point is a common zero of all components")]
    AllCommonZeros,
    #[error("component {component} has L(z) = 0 at its truncation level")]
    DegenerateComponent { component: usize },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Truncation(#[from] TruncationError),
}

/// Real transform `g` applied to a draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Transform {
    Identity,
    Square,
    Cube,
    /// Second normalized Hermite polynomial `(x^2 - 1) / sqrt 2`.
    CenteredSquare,
    /// `c_0 + c_1 x + c_2 x^2 + ...`
    Polynomial(Vec<f64>),
}

impl Transform {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Square => x * x,
            Transform::Cube => x * x * x,
            Transform::CenteredSquare => (x * x - 1.0) * std::f64::consts::FRAC_1_SQRT_2,
            Transform::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
        }
    }

    pub fn parse(s: &str) -> Result<Self, KernelError> {
        let s = s.trim();
        match s {
            "identity" | "x" => Ok(Transform::Identity),
            "square" | "x^2" => Ok(Transform::Square),
            "cube" | "x^3" => Ok(Transform::Cube),
            "centered_square" | "hermite2" => Ok(Transform::CenteredSquare),
            _ => {
                let coeffs = s
                    .strip_prefix("poly:")
                    .ok_or_else(|| KernelError::UnknownTransform(s.to_string()))?;
                let c: Result<Vec<f64>, _> = coeffs.split(',').map(|t| t.trim().parse::<f64>()).collect();
                match c {
                    Ok(c) if !c.is_empty() && c.iter().all(|v| v.is_finite()) => Ok(Transform::Polynomial(c)),
                    _ => Err(KernelError::UnknownTransform(s.to_string())),
                }
            }
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// `g(-x) = -g(x)`.
    pub fn is_odd(&self) -> bool {
        match self {
            Transform::Identity | Transform::Cube => true,
            Transform::Square | Transform::CenteredSquare => false,
            Transform::Polynomial(c) => c.iter().step_by(2).all(|&v| v == 0.0),
        }
    }

    pub fn is_even(&self) -> bool {
        match self {
            Transform::Identity | Transform::Cube => false,
            Transform::Square | Transform::CenteredSquare => true,
            Transform::Polynomial(c) => c.iter().skip(1).step_by(2).all(|&v| v == 0.0),
        }
    }

    /// `Some(p)` when `g(x) = x^p`.
    pub fn monomial_power(&self) -> Option<u32> {
        match self {
            Transform::Identity => Some(1),
            Transform::Square => Some(2),
            Transform::Cube => Some(3),
            Transform::CenteredSquare => None,
            Transform::Polynomial(c) => {
                let mut nonzero = c.iter().enumerate().filter(|(_, &v)| v != 0.0);
                match (nonzero.next(), nonzero.next()) {
                    (Some((p, &v)), None) if p >= 1 && v == 1.0 => Some(p as u32),
                    _ => None,
                }
            }
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Identity => f.write_str("identity"),
            Transform::Square => f.write_str("square"),
            Transform::Cube => f.write_str("cube"),
            Transform::CenteredSquare => f.write_str("centered_square"),
            Transform::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
        }
    }
}

impl TryFrom<String> for Transform {
    type Error = KernelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Transform::parse(&s)
    }
}

impl From<Transform> for String {
    fn from(t: Transform) -> String {
        t.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub lambda: f64,
    pub transform: Transform,
}

impl Component {
    pub fn new(lambda: f64, transform: Transform) -> Self {
        Self { lambda, transform }
    }
}

/// Ordered eigen-pairs `(lambda_l, g_l)`. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    components: Vec<Component>,
}

impl KernelSpec {
    pub fn new(components: Vec<Component>) -> Result<Self, KernelError> {
        if components.is_empty() {
            return Err(KernelError::Empty);
        }
        for (index, c) in components.iter().enumerate() {
            if !(c.lambda.is_finite() && c.lambda >= 0.0) {
                return Err(KernelError::InvalidLambda { index, value: c.lambda });
            }
        }
        Ok(Self { components })
    }

    /// `h(x, y) = x y`.
    pub fn product() -> Self {
        Self {
            components: vec![Component::new(1.0, Transform::Identity)],
        }
    }

    /// `h(x, y) = x y + x^3 y^3`; violates the cross-orthogonality condition
    /// under Rademacher input.
    pub fn remark() -> Self {
        Self {
            components: vec![
                Component::new(1.0, Transform::Identity),
                Component::new(1.0, Transform::Cube),
            ],
        }
    }

    /// First two normalized Hermite polynomials with the given weights.
    pub fn hermite_pair(lambda1: f64, lambda2: f64) -> Result<Self, KernelError> {
        Self::new(vec![
            Component::new(lambda1, Transform::Identity),
            Component::new(lambda2, Transform::CenteredSquare),
        ])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Component count `m`.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// All weights vanish.
    pub fn is_null(&self) -> bool {
        self.components.iter().all(|c| c.lambda == 0.0)
    }

    /// `sum_l lambda_l g_l(x) g_l(y)`; exactly symmetric.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.lambda * (c.transform.eval(x) * c.transform.eval(y)))
            .sum()
    }
}

pub fn eval_kernel(k: &KernelSpec, x: f64, y: f64) -> f64 {
    k.eval(x, y)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyVerdict {
    pub component: usize,
    pub transform: String,
    pub estimate: f64,
    pub std_error: f64,
    /// Zero mean forced by an odd transform under a symmetric law.
    pub by_symmetry: bool,
    pub pass: bool,
}

/// Estimates `E g_l(X)` per component; pass iff `|estimate| <= 4 SE`.
pub fn check_degeneracy(
    k: &KernelSpec,
    dist: &DistributionSpec,
    budget: usize,
    seed: u64,
) -> Result<Vec<DegeneracyVerdict>, KernelError> {
    if budget < MIN_CHECK_BUDGET {
        return Err(KernelError::BudgetTooSmall(budget));
    }
    let key = StreamKey::salted(seed, DEGENERACY_SALT, 0);
    let mut draws: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(k.len());
    for (l, c) in k.components().iter().enumerate() {
        let g = &c.transform;
        if dist.is_symmetric() && g.is_odd() {
            out.push(DegeneracyVerdict {
                component: l,
                transform: g.name(),
                estimate: 0.0,
                std_error: 0.0,
                by_symmetry: true,
                pass: true,
            });
            continue;
        }
        let xs = draws.get_or_insert_with(|| (0..budget as u64).map(|i| dist.draw(&key, i)).collect());
        let (mean, se) = mean_and_se(xs.iter().map(|&x| g.eval(x)), budget);
        out.push(DegeneracyVerdict {
            component: l,
            transform: g.name(),
            estimate: mean,
            std_error: se,
            by_symmetry: false,
            pass: mean.abs() <= 4.0 * se,
        });
    }
    Ok(out)
}

fn mean_and_se(values: impl Iterator<Item = f64>, count: usize) -> (f64, f64) {
    let mut s = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for v in values {
        s.add(v);
        s2.add_square(v);
    }
    let n = count as f64;
    let mean = s.value() / n;
    let var = (s2.value() / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthogonalityReport {
    pub n: u64,
    pub x_n: f64,
    /// Truncation level `z_{n,l}` per component.
    pub levels: Vec<f64>,
    /// `L_l(z_{n,l})` per component.
    pub l_at_level: Vec<f64>,
    /// `E[gbar_l gbar_k] / sqrt(L_l L_k)`, row-major `m x m`.
    pub correlation: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    pub pass: bool,
}

impl OrthogonalityReport {
    /// Off-diagonal pairs `(l, k, estimate, se)` with `l < k`.
    pub fn off_diagonal(&self) -> Vec<(usize, usize, f64, f64)> {
        let m = self.correlation.len();
        let mut v = Vec::new();
        for l in 0..m {
            for k in l + 1..m {
                v.push((l, k, self.correlation[l][k], self.std_error[l][k]));
            }
        }
        v
    }
}

/// Normalized cross moments of the truncated components at level
/// `z_{n,l}`; pass iff every off-diagonal entry is within 4 SE of zero.
pub fn check_orthogonality_a2(
    k: &KernelSpec,
    dist: &DistributionSpec,
    n: u64,
    x_n: f64,
    budget: usize,
    seed: u64,
    method: MomentMethod,
) -> Result<OrthogonalityReport, KernelError> {
    if budget < MIN_CHECK_BUDGET {
        return Err(KernelError::BudgetTooSmall(budget));
    }
    let m = k.len();
    let mut levels = Vec::with_capacity(m);
    let mut l_at = Vec::with_capacity(m);
    for (l, c) in k.components().iter().enumerate() {
        let moment = SecondMoment::resolve(dist, &c.transform, method)?;
        let b = truncation::compute_b_for(&moment)?;
        let z = truncation::compute_z_for(&moment, b, n, x_n)?;
        let lz = moment.eval(z);
        if lz <= 0.0 {
            return Err(KernelError::DegenerateComponent { component: l });
        }
        levels.push(z);
        l_at.push(lz);
    }

    let key = StreamKey::salted(seed, ORTHOGONALITY_SALT, 0);
    let mut sums = vec![vec![CompensatedSum::new(); m]; m];
    let mut sq_sums = vec![vec![CompensatedSum::new(); m]; m];
    let mut truncated = vec![0.0; m];
    for i in 0..budget as u64 {
        let x = dist.draw(&key, i);
        for (l, c) in k.components().iter().enumerate() {
            let v = c.transform.eval(x);
            truncated[l] = if v.abs() <= levels[l] { v } else { 0.0 };
        }
        for l in 0..m {
            for j in l..m {
                let p = truncated[l] * truncated[j];
                sums[l][j].add(p);
                sq_sums[l][j].add_square(p);
            }
        }
    }
    let nb = budget as f64;
    let mut correlation = vec![vec![0.0; m]; m];
    let mut std_error = vec![vec![0.0; m]; m];
    for l in 0..m {
        for j in l..m {
            let mean = sums[l][j].value() / nb;
            let var = (sq_sums[l][j].value() / nb - mean * mean).max(0.0) * nb / (nb - 1.0);
            let scale = (l_at[l] * l_at[j]).sqrt();
            correlation[l][j] = mean / scale;
            correlation[j][l] = mean / scale;
            std_error[l][j] = (var / nb).sqrt() / scale;
            std_error[j][l] = std_error[l][j];
        }
    }
    let mut report = OrthogonalityReport {
        n,
        x_n,
        levels,
        l_at_level: l_at,
        correlation,
        std_error,
        pass: true,
    };
    report.pass = report.off_diagonal().iter().all(|&(_, _, r, se)| r.abs() <= 4.0 * se);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    /// `c_l = max over the grid of lambda_l g_l^2 / sum_v lambda_v g_v^2`.
    pub c: Vec<f64>,
    pub c_sum: f64,
    pub points_used: usize,
    pub points_skipped: usize,
}

/// Per-point shares `lambda_l g_l(x)^2 / sum_v lambda_v g_v(x)^2`; `None` at
/// common zeros.
pub fn dominance_shares(k: &KernelSpec, x: f64) -> Option<Vec<f64>> {
    let weights: Vec<f64> = k
        .components()
        .iter()
        .map(|c| {
            let g = c.transform.eval(x);
            c.lambda * g * g
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if total > 0.0 && total.is_finite() {
        Some(weights.iter().map(|w| w / total).collect())
    } else {
        None
    }
}

/// Grid estimate of the dominance constants `c_l`.
pub fn check_dominance_a1prime(k: &KernelSpec, probe_grid: &[f64]) -> Result<DominanceReport, KernelError> {
    if probe_grid.is_empty() {
        return Err(KernelError::EmptyGrid);
    }
    let mut c = vec![0.0_f64; k.len()];
    let mut used = 0;
    for &x in probe_grid {
        if let Some(shares) = dominance_shares(k, x) {
            used += 1;
            for (cl, s) in c.iter_mut().zip(shares) {
                *cl = cl.max(s);
            }
        }
    }
    if used == 0 {
        return Err(KernelError::AllCommonZeros);
    }
    Ok(DominanceReport {
        c_sum: c.iter().sum(),
        c,
        points_used: used,
        points_skipped: probe_grid.len() - used,
    })
}
