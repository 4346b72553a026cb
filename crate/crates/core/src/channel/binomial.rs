//! Binomial distribution machinery on the log scale.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::logprob::{ln_add_exp, ln_sum_exp, LogProb};
use crate::error::{domain, Result};

/// Largest `n` for which binomial coefficients are formed exactly in integers.
const EXACT_COEFF_MAX_N: u32 = 64;

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("p", p, "[0, 1]"));
    }
    let term = |q: f64| if q == 0.0 { 0.0 } else { -q * q.log2() };
    Ok(term(p) + term(1.0 - p))
}

/// Capacity of BSC(p) in bits per channel use.
pub fn bsc_capacity(p: f64) -> Result<f64> {
    Ok(1.0 - binary_entropy(p)?)
}

/// `ln C(n, k)`; `-inf` when `k` is outside `[0, n]`.
pub fn ln_binom_coeff(n: u32, k: i64) -> f64 {
    if k < 0 || k > i64::from(n) {
        return f64::NEG_INFINITY;
    }
    let k = k as u32;
    let k = k.min(n - k);
    if n <= EXACT_COEFF_MAX_N {
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * u128::from(n - i) / u128::from(i + 1);
        }
        (c as f64).ln()
    } else {
        ln_gamma(f64::from(n) + 1.0) - ln_gamma(f64::from(k) + 1.0) - ln_gamma(f64::from(n - k) + 1.0)
    }
}

/// `ln [C(n,k) p^k (1-p)^(n-k)]`; `-inf` for `k` outside `[0, n]`.
///
/// # Panics
///
/// If `p` is not in `[0, 1]`.
pub fn log_binom_pmf(n: u32, k: i64, p: f64) -> LogProb {
    assert!((0.0..=1.0).contains(&p), "success probability {p} outside [0, 1]");
    if k < 0 || k > i64::from(n) {
        return LogProb::ZERO;
    }
    let failures = i64::from(n) - k;
    let success_part = if k == 0 { 0.0 } else { k as f64 * p.ln() };
    let failure_part = if failures == 0 {
        0.0
    } else {
        failures as f64 * (-p).ln_1p()
    };
    LogProb::saturating(ln_binom_coeff(n, k) + success_part + failure_part)
}

/// `ln P[k_from <= K <= k_to]` for `K ~ Binom(n, p)`. Empty ranges give `-inf`.
pub fn log_binom_tail(n: u32, k_from: i64, k_to: i64, p: f64) -> LogProb {
    let lo = k_from.max(0);
    let hi = k_to.min(i64::from(n));
    if lo > hi {
        return LogProb::ZERO;
    }
    LogProb::saturating(ln_sum_exp((lo..=hi).map(|k| log_binom_pmf(n, k, p).ln())))
}

/// `Binom(trials, success_prob)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomialDist {
    trials: u32,
    success_prob: f64,
}

impl BinomialDist {
    pub fn new(trials: u32, success_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&success_prob) {
            return Err(domain("success_prob", success_prob, "[0, 1]"));
        }
        Ok(Self {
            trials,
            success_prob,
        })
    }

    pub fn trials(&self) -> u32 {
        self.trials
    }

    pub fn success_prob(&self) -> f64 {
        self.success_prob
    }

    pub fn ln_pmf(&self, k: i64) -> LogProb {
        log_binom_pmf(self.trials, k, self.success_prob)
    }

    pub fn ln_range(&self, from: i64, to: i64) -> LogProb {
        log_binom_tail(self.trials, from, to, self.success_prob)
    }

    /// Precomputes cumulative sums in both directions for O(1) tail queries.
    pub fn table(&self) -> BinomialTable {
        BinomialTable::new(self)
    }
}

/// Log pmf together with running lower sums `P[K < k]` and upper sums
/// `P[K > k]`, each accumulated outward from its own end of the support.
#[derive(Clone, Debug)]
pub struct BinomialTable {
    pmf: Vec<f64>,
    below: Vec<f64>,
    above: Vec<f64>,
}

impl BinomialTable {
    fn new(dist: &BinomialDist) -> Self {
        let n = dist.trials as usize;
        let pmf: Vec<f64> = (0..=n).map(|k| dist.ln_pmf(k as i64).ln()).collect();
        // below[k] = ln P[K < k] for k in 0..=n+1
        let mut below = vec![f64::NEG_INFINITY; n + 2];
        for k in 0..=n {
            below[k + 1] = ln_add_exp(below[k], pmf[k]);
        }
        // above[k] = ln P[K > k] for k in 0..=n, plus above[-1] stored at index n+1 unused
        let mut above = vec![f64::NEG_INFINITY; n + 1];
        for k in (0..n).rev() {
            above[k] = ln_add_exp(above[k + 1], pmf[k + 1]);
        }
        Self { pmf, below, above }
    }

    pub fn trials(&self) -> u32 {
        (self.pmf.len() - 1) as u32
    }

    pub fn ln_pmf(&self, k: i64) -> f64 {
        usize::try_from(k)
            .ok()
            .and_then(|k| self.pmf.get(k).copied())
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// `ln P[K < k]`.
    pub fn ln_below(&self, k: i64) -> f64 {
        if k <= 0 {
            f64::NEG_INFINITY
        } else {
            let idx = (k as usize).min(self.below.len() - 1);
            self.below[idx].min(0.0)
        }
    }

    /// `ln P[K > k]`.
    pub fn ln_above(&self, k: i64) -> f64 {
        if k < 0 {
            0.0
        } else {
            self.above
                .get(k as usize)
                .copied()
                .unwrap_or(f64::NEG_INFINITY)
                .min(0.0)
        }
    }
}
