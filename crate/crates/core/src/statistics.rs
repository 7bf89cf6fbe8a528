//! The degenerate U-statistic, its component sums and the self-normalized
//! statistic
//!
//! ```text
//! n(n-1) U_n = sum_l lambda_l (Y_l^2 - V_l^2)
//! W_n        = n(n-1) U_n / max_l lambda_l V_l^2
//! ```
//!
//! with `Y_l = sum_i g_l(X_i)` and `V_l^2 = sum_i g_l(X_i)^2`.

use serde::Serialize;
use thiserror::Error;

use crate::kernels::{KernelSpec, Transform};
use crate::sum::{CompensatedSum, DoubleDouble};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatError {
    #[error("U-statistic needs at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("self-normalizer is zero: every component vanishes on the sample")]
    ZeroNormalizer,
    #[error("kernel has {kernel} components but sums were built for {sums}")]
    ComponentMismatch { kernel: usize, sums: usize },
}

/// Running `(Y_l, V_l^2)` for each component; extendable one draw at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSums {
    y: Vec<CompensatedSum>,
    vsq: Vec<CompensatedSum>,
    n: u64,
}

impl ComponentSums {
    pub fn new(components: usize) -> Self {
        Self {
            y: vec![CompensatedSum::new(); components],
            vsq: vec![CompensatedSum::new(); components],
            n: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, k: &KernelSpec, x: f64) {
        for ((c, y), v) in k.components().iter().zip(&mut self.y).zip(&mut self.vsq) {
            let g = c.transform.eval(x);
            y.add(g);
            v.add_square(g);
        }
        self.n += 1;
    }

    pub fn extend(&mut self, k: &KernelSpec, xs: &[f64]) {
        for (l, c) in k.components().iter().enumerate() {
            let (y, v) = (&mut self.y[l], &mut self.vsq[l]);
            match &c.transform {
                Transform::Identity => accumulate(y, v, xs, |x| x),
                Transform::Square => accumulate(y, v, xs, |x| x * x),
                Transform::Cube => accumulate(y, v, xs, |x| x * x * x),
                t => accumulate(y, v, xs, |x| t.eval(x)),
            }
        }
        self.n += xs.len() as u64;
    }

    pub fn reset(&mut self) {
        self.y.iter_mut().for_each(|s| *s = CompensatedSum::new());
        self.vsq.iter_mut().for_each(|s| *s = CompensatedSum::new());
        self.n = 0;
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn y(&self, l: usize) -> f64 {
        self.y[l].value()
    }

    pub fn vsq(&self, l: usize) -> f64 {
        self.vsq[l].value()
    }

    /// `sum_l lambda_l (Y_l^2 - V_l^2)` in double-double.
    pub fn pair_sum(&self, k: &KernelSpec) -> f64 {
        let mut acc = DoubleDouble::ZERO;
        for ((c, y), v) in k.components().iter().zip(&self.y).zip(&self.vsq) {
            if c.lambda == 0.0 {
                continue;
            }
            let d = y.as_double_double().square() - v.as_double_double();
            acc = acc + d.scale(c.lambda);
        }
        acc.to_f64()
    }

    /// `(max_l lambda_l V_l^2, argmax)` with ties to the smallest index.
    pub fn normalizer(&self, k: &KernelSpec) -> (f64, usize) {
        let mut best = (0.0, 0);
        for (l, (c, v)) in k.components().iter().zip(&self.vsq).enumerate() {
            let w = c.lambda * v.value();
            if w > best.0 {
                best = (w, l);
            }
        }
        best
    }

    /// `W_n` alone, for hot loops. `None` when the normalizer vanishes.
    #[inline]
    pub fn w(&self, k: &KernelSpec) -> Option<f64> {
        let (norm, _) = self.normalizer(k);
        (norm > 0.0).then(|| self.pair_sum(k) / norm)
    }
}

#[inline]
fn accumulate(y: &mut CompensatedSum, v: &mut CompensatedSum, xs: &[f64], g: impl Fn(f64) -> f64) {
    for &x in xs {
        let gx = g(x);
        y.add(gx);
        v.add_square(gx);
    }
}

/// Per-sample statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticResult {
    pub n: u64,
    pub y: Vec<f64>,
    pub vsq: Vec<f64>,
    pub u: f64,
    pub normalizer: f64,
    pub w: f64,
    pub argmax: usize,
}

pub fn component_sums(sample: &[f64], k: &KernelSpec) -> ComponentSums {
    let mut s = ComponentSums::new(k.len());
    s.extend(k, sample);
    s
}

pub fn u_stat(sample: &[f64], k: &KernelSpec) -> Result<f64, StatError> {
    let n = sample.len();
    if n < 2 {
        return Err(StatError::TooFewObservations(n));
    }
    let sums = component_sums(sample, k);
    Ok(sums.pair_sum(k) / (n as f64 * (n as f64 - 1.0)))
}

/// Direct `O(n^2 m)` double sum over `i != j`; test oracle for [`u_stat`].
pub fn u_stat_bruteforce(sample: &[f64], k: &KernelSpec) -> Result<f64, StatError> {
    let n = sample.len();
    if n < 2 {
        return Err(StatError::TooFewObservations(n));
    }
    let mut total = DoubleDouble::ZERO;
    for c in k.components() {
        let g: Vec<f64> = sample.iter().map(|&x| c.transform.eval(x)).collect();
        let mut acc = DoubleDouble::ZERO;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc = acc + DoubleDouble::from_f64(g[i]) * DoubleDouble::from_f64(g[j]);
                }
            }
        }
        total = total + acc.scale(c.lambda);
    }
    Ok(total.to_f64() / (n as f64 * (n as f64 - 1.0)))
}

/// Statistic from accumulated sums.
pub fn w_from_sums(k: &KernelSpec, sums: &ComponentSums) -> Result<StatisticResult, StatError> {
    if sums.len() != k.len() {
        return Err(StatError::ComponentMismatch {
            kernel: k.len(),
            sums: sums.len(),
        });
    }
    let n = sums.n();
    if n < 2 {
        return Err(StatError::TooFewObservations(n as usize));
    }
    let (normalizer, argmax) = sums.normalizer(k);
    if normalizer <= 0.0 {
        return Err(StatError::ZeroNormalizer);
    }
    let pair = sums.pair_sum(k);
    Ok(StatisticResult {
        n,
        y: (0..sums.len()).map(|l| sums.y(l)).collect(),
        vsq: (0..sums.len()).map(|l| sums.vsq(l)).collect(),
        u: pair / (n as f64 * (n as f64 - 1.0)),
        normalizer,
        w: pair / normalizer,
        argmax,
    })
}

pub fn w_stat(sample: &[f64], k: &KernelSpec) -> Result<StatisticResult, StatError> {
    if sample.len() < 2 {
        return Err(StatError::TooFewObservations(sample.len()));
    }
    w_from_sums(k, &component_sums(sample, k))
}
