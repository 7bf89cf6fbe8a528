//! Compensated accumulation.
//!
//! Sums of `g(X_i)` and `g(X_i)^2` over a million draws feed a difference
//! `Y^2 - V^2` that can cancel almost completely for heavy-tailed inputs, so
//! both are carried as an unevaluated pair `hi + lo` and squares enter via
//! an error-free product.

use std::ops::{Add, Mul, Neg, Sub};

#[cfg(not(target_feature = "fma"))]
const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[cfg(not(target_feature = "fma"))]
#[inline]
fn split(a: f64) -> (f64, f64) {
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

/// `a * b` as `p + e` exactly, barring overflow.
#[cfg(target_feature = "fma")]
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `a * b` as `p + e` exactly (Dekker), barring overflow.
#[cfg(not(target_feature = "fma"))]
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, e)
}

/// Double-double value `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn scale(self, c: f64) -> Self {
        let (p, e) = two_prod(self.hi, c);
        let (hi, lo) = fast_two_sum(p, e + self.lo * c);
        Self { hi, lo }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = fast_two_sum(s, e + t);
        let (hi, lo) = fast_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = fast_two_sum(p, e);
        Self { hi, lo }
    }
}

/// Running sum with a separate error term for the rounding of each addition.
///
/// The loop-carried chain is a single `f64` add on `hi`; the error terms are
/// accumulated into `lo` and folded back only on read.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    hi: f64,
    lo: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        self.hi = s;
        self.lo += e;
    }

    /// Adds `x * x` without rounding the square.
    #[inline]
    pub fn add_square(&mut self, x: f64) {
        let (p, e) = two_prod(x, x);
        self.add(p);
        self.lo += e;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.hi);
        self.lo += other.lo;
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }

    pub fn as_double_double(&self) -> DoubleDouble {
        let (hi, lo) = two_sum(self.hi, self.lo);
        DoubleDouble { hi, lo }
    }
}
