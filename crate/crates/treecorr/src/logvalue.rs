//! Non-negative reals in log domain.
//!
//! Likelihood ratios span many orders of magnitude (roughly `exp(±(λss')^d)`),
//! so all likelihood arithmetic is done on `LogValue`: a non-negative real
//! stored as its natural log, with exact zero encoded as `-inf`.

use std::cmp::Ordering;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign};

/// A non-negative real number stored in log domain.
///
/// The representable range comfortably covers `exp(±1e4)`. Exact zero is a
/// first-class value (`ln = -inf`), so products with zero and sums of zeros
/// behave exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogValue {
    ln: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue { ln: f64::NEG_INFINITY };
    pub const ONE: LogValue = LogValue { ln: 0.0 };

    /// Value `exp(ln)`.
    pub fn from_ln(ln: f64) -> Self {
        debug_assert!(!ln.is_nan(), "LogValue from NaN");
        LogValue { ln }
    }

    /// Panics if `x < 0` or NaN.
    pub fn from_f64(x: f64) -> Self {
        assert!(x >= 0.0, "LogValue requires a non-negative value, got {x}");
        LogValue { ln: x.ln() }
    }

    pub fn is_zero(self) -> bool {
        self.ln == f64::NEG_INFINITY
    }

    /// Natural log of the value (`-inf` for zero).
    pub fn ln(self) -> f64 {
        self.ln
    }

    /// Back to linear domain; may overflow to `inf` or underflow to 0.
    pub fn to_f64(self) -> f64 {
        self.ln.exp()
    }

    /// `self^k` for integer `k ≥ 0` (with `0^0 = 1`).
    pub fn powi(self, k: u32) -> Self {
        if k == 0 {
            LogValue::ONE
        } else {
            LogValue { ln: self.ln * f64::from(k) }
        }
    }
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        // -inf + finite = -inf handles zero; -inf + inf would be NaN but
        // +inf magnitudes never arise from the constructors used here.
        if self.is_zero() || rhs.is_zero() {
            LogValue::ZERO
        } else {
            LogValue { ln: self.ln + rhs.ln }
        }
    }
}

impl MulAssign for LogValue {
    fn mul_assign(&mut self, rhs: LogValue) {
        *self = *self * rhs;
    }
}

impl Add for LogValue {
    type Output = LogValue;
    fn add(self, rhs: LogValue) -> LogValue {
        // log-sum-exp anchored at the larger operand.
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (hi, lo) = if self.ln >= rhs.ln { (self.ln, rhs.ln) } else { (rhs.ln, self.ln) };
        LogValue { ln: hi + (lo - hi).exp().ln_1p() }
    }
}

impl AddAssign for LogValue {
    fn add_assign(&mut self, rhs: LogValue) {
        *self = *self + rhs;
    }
}

impl Sum for LogValue {
    fn sum<I: Iterator<Item = LogValue>>(iter: I) -> LogValue {
        iter.fold(LogValue::ZERO, |a, b| a + b)
    }
}

impl PartialOrd for LogValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.ln.partial_cmp(&other.ln)
    }
}

/// `ln(n!)` by direct summation; exact enough for the small counts that occur
/// as node degrees.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `ln P(Poi(mu) = k)`, with the `mu = 0` point mass handled exactly.
pub fn poisson_ln_pmf(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mu.ln() - mu - ln_factorial(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_and_one() {
        assert!(LogValue::ZERO.is_zero());
        assert_eq!(LogValue::ONE.to_f64(), 1.0);
        assert_eq!((LogValue::ZERO * LogValue::ONE), LogValue::ZERO);
        assert_eq!((LogValue::ZERO + LogValue::ONE), LogValue::ONE);
    }

    #[test]
    fn add_mul_match_linear() {
        let a = LogValue::from_f64(3.5);
        let b = LogValue::from_f64(0.002);
        assert_relative_eq!((a + b).to_f64(), 3.502, max_relative = 1e-14);
        assert_relative_eq!((a * b).to_f64(), 0.007, max_relative = 1e-14);
        assert_relative_eq!(a.powi(3).to_f64(), 42.875, max_relative = 1e-14);
    }

    #[test]
    fn sum_handles_wide_range() {
        let v = [LogValue::from_ln(-5000.0), LogValue::from_ln(5000.0)];
        let s: LogValue = v.into_iter().sum();
        assert_relative_eq!(s.ln(), 5000.0, max_relative = 1e-15);
    }

    #[test]
    fn factorial_and_poisson() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert_relative_eq!(ln_factorial(5), 120f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(poisson_ln_pmf(2, 1.5), (1.5f64.powi(2) / 2.0).ln() - 1.5, max_relative = 1e-14);
        assert_eq!(poisson_ln_pmf(0, 0.0), 0.0);
        assert_eq!(poisson_ln_pmf(3, 0.0), f64::NEG_INFINITY);
    }
}
