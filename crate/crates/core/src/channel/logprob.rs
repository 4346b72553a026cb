//! Probabilities carried as natural logarithms.
//!
//! Every probability in the bound evaluators lives on the log scale so that
//! quantities such as `1e-10` times a product of several small factors never
//! underflow. Sums go through log-sum-exp; products are additions.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Result};

/// A probability stored as its natural logarithm. `-inf` is exactly zero.
#[derive(Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    /// Wraps a natural-log value. Values a few ulps above zero (rounding in
    /// upstream sums) are clamped to zero.
    pub fn new(ln: f64) -> Result<Self> {
        if ln.is_nan() || ln > 1e-9 {
            return Err(domain("log-probability", ln, "(-inf, 0]"));
        }
        Ok(LogProb(ln.min(0.0)))
    }

    /// Clamping constructor for internal sums whose exact value is known to be
    /// a probability.
    pub(crate) fn saturating(ln: f64) -> Self {
        debug_assert!(!ln.is_nan());
        LogProb(ln.min(0.0))
    }

    pub fn from_prob(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain("probability", p, "[0, 1]"));
        }
        Ok(LogProb(p.ln()))
    }

    pub fn from_log10(log10: f64) -> Result<Self> {
        Self::new(log10 * std::f64::consts::LN_10)
    }

    #[inline]
    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn log10(self) -> f64 {
        self.0 / std::f64::consts::LN_10
    }

    #[inline]
    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// `log(a + b)`, saturating at probability one.
    pub fn add(self, other: LogProb) -> LogProb {
        LogProb::saturating(ln_add_exp(self.0, other.0))
    }

    /// `log(1 - p)`.
    pub fn complement(self) -> LogProb {
        LogProb(ln_one_minus_exp(self.0))
    }

    pub fn min(self, other: LogProb) -> LogProb {
        if self.0 <= other.0 {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: LogProb) -> LogProb {
        if self.0 >= other.0 {
            self
        } else {
            other
        }
    }

    pub fn total_cmp(&self, other: &LogProb) -> Ordering {
        self.0.total_cmp(&other.0)
    }

    /// Sum of probabilities, accumulated from the smallest term to the largest.
    pub fn sum<I: IntoIterator<Item = LogProb>>(terms: I) -> LogProb {
        LogProb::saturating(ln_sum_exp(terms.into_iter().map(|t| t.0)))
    }
}

impl Mul for LogProb {
    type Output = LogProb;

    fn mul(self, rhs: LogProb) -> LogProb {
        // -inf + anything finite stays -inf; both operands are <= 0 so no inf - inf.
        LogProb(self.0 + rhs.0)
    }
}

impl fmt::Debug for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogProb(ln={}, p={:e})", self.0, self.prob())
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.prob())
    }
}

// JSON has no infinities, so zero probability is written as the string "-inf".
impl Serialize for LogProb {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for LogProb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => LogProb::new(v).map_err(serde::de::Error::custom),
            Raw::Text(t) if t == "-inf" => Ok(LogProb::ZERO),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"-inf\", got {t:?}"
            ))),
        }
    }
}

/// Serde adapter for `f64` fields that may hold infinities (written as
/// `"inf"` / `"-inf"`).
pub mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(serde::de::Error::custom(format!("not a number: {t:?}"))),
            },
        }
    }
}

/// `ln(e^a + e^b)` without overflow or cancellation.
#[inline]
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 - e^x)` for `x <= 0`, switching branches at `-ln 2` for accuracy.
#[inline]
pub fn ln_one_minus_exp(x: f64) -> f64 {
    if x >= 0.0 {
        f64::NEG_INFINITY
    } else if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(e^a - e^b)` for `a >= b`.
#[inline]
pub fn ln_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + ln_one_minus_exp(b - a)
}

/// Log-sum-exp over arbitrary terms. The terms are sorted ascending and the
/// shifted exponentials are accumulated smallest first.
pub fn ln_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut v: Vec<f64> = terms.into_iter().collect();
    ln_sum_exp_in_place(&mut v)
}

/// [`ln_sum_exp`] over a caller-owned buffer, which is left sorted.
pub fn ln_sum_exp_in_place(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let Some(&max) = v.last() else {
        return f64::NEG_INFINITY;
    };
    if max == f64::NEG_INFINITY {
        return max;
    }
    let acc: f64 = v.iter().map(|t| (t - max).exp()).sum();
    max + acc.ln()
}
