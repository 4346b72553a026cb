//! Random-coding union bound.
//!
//! [`rcu_bsc`] evaluates the bound exactly for the BSC with equiprobable
//! inputs; [`rcu_general_mc`] estimates it for an arbitrary DMC by sampling the
//! outer expectation and convolving the inner conditional probability.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{check_crossover, ln_add_exp, ln_binom_coeff, ln_sum_exp, log_binom_pmf, Dmc, LogProb};
use crate::error::{domain, Error, Result};

/// Codebook size `M`, carried as `log2 M` so that sizes like `2^400` fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageCount {
    log2_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exact_m: Option<u64>,
}

impl MessageCount {
    pub fn exact(m: u64) -> Result<Self> {
        if m == 0 {
            return Err(domain("M", 0.0, "M >= 1"));
        }
        Ok(Self {
            log2_m: (m as f64).log2(),
            exact_m: Some(m),
        })
    }

    pub fn from_log2(log2_m: f64) -> Result<Self> {
        if !(log2_m.is_finite() && log2_m >= 0.0) {
            return Err(domain("log2 M", log2_m, "[0, inf)"));
        }
        Ok(Self {
            log2_m,
            exact_m: None,
        })
    }

    pub fn log2(&self) -> f64 {
        self.log2_m
    }

    pub fn exact_value(&self) -> Option<u64> {
        self.exact_m
    }

    /// `ln(M - 1)`, `-inf` for `M = 1`.
    pub fn ln_m_minus_one(&self) -> f64 {
        match self.exact_m {
            Some(m) => ((m - 1) as f64).ln(),
            None => {
                if self.log2_m == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    self.log2_m * std::f64::consts::LN_2 + (-(-self.log2_m).exp2()).ln_1p()
                }
            }
        }
    }

    pub fn is_single(&self) -> bool {
        self.log2_m == 0.0
    }
}

/// `rcu(n, M)` for a particular channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcuValue {
    pub value: LogProb,
    pub n: u32,
    pub m: MessageCount,
}

/// Exact RCU bound on BSC(p) under equiprobable inputs:
/// `sum_k C(n,k) p^k (1-p)^(n-k) min{1, (M-1) sum_{j<=k} C(n,j) 2^-n}`.
pub fn rcu_bsc(n: u32, m: MessageCount, p: f64) -> Result<RcuValue> {
    if n == 0 {
        return Err(domain("n", 0.0, "n >= 1"));
    }
    check_crossover(p)?;
    Ok(RcuValue {
        value: LogProb::saturating(ln_rcu_bsc(n, m.ln_m_minus_one(), p)),
        n,
        m,
    })
}

/// Kernel shared by [`rcu_bsc`] and the optimizer's tables. Accepts `p = 0`,
/// where only the `k = 0` term carries mass.
pub(crate) fn ln_rcu_bsc(n: u32, ln_m_minus_one: f64, p: f64) -> f64 {
    if ln_m_minus_one == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let ln_codeword = -f64::from(n) * std::f64::consts::LN_2;
    let mut ln_ball = f64::NEG_INFINITY;
    let mut terms = Vec::with_capacity(n as usize + 1);
    for k in 0..=i64::from(n) {
        ln_ball = ln_add_exp(ln_ball, ln_binom_coeff(n, k) + ln_codeword);
        let union = (ln_m_minus_one + ln_ball).min(0.0);
        terms.push(log_binom_pmf(n, k, p).ln() + union);
    }
    ln_sum_exp(terms).min(0.0)
}

/// Monte Carlo estimate with a 95% normal-approximation half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub samples: u64,
}

const MIN_MC_SAMPLES: u64 = 1000;
// Information densities closer than this are treated as equal (ties count in the RCU).
const DENSITY_GRID: f64 = 1e-9;

/// Monte Carlo estimate of `rcu(n, M)` on an arbitrary DMC with i.i.d.
/// inputs. Sample `s` uses stream `s` of a ChaCha generator keyed by `seed`,
/// so the estimate does not depend on thread count.
pub fn rcu_general_mc(
    dmc: &Dmc,
    input_dist: &[f64],
    n: u32,
    m: MessageCount,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if input_dist.len() != dmc.inputs() {
        return Err(Error::InvalidDistribution(format!(
            "{} probabilities for {} inputs",
            input_dist.len(),
            dmc.inputs()
        )));
    }
    if input_dist.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
        return Err(Error::InvalidDistribution("negative or non-finite mass".into()));
    }
    let total: f64 = input_dist.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
    }
    if n == 0 {
        return Err(domain("n", 0.0, "n >= 1"));
    }
    if samples < MIN_MC_SAMPLES {
        return Err(domain("samples", samples as f64, ">= 1000"));
    }
    if m.is_single() {
        return Ok(McEstimate {
            mean: 0.0,
            half_width: 0.0,
            samples,
        });
    }

    let outputs = dmc.outputs();
    let output_marginal: Vec<f64> = (0..outputs)
        .map(|y| (0..dmc.inputs()).map(|x| input_dist[x] * dmc.transition(x, y)).sum())
        .collect();
    // density[x][y] = ln P(y|x) - ln P_Y(y)
    let density: Vec<Vec<f64>> = (0..dmc.inputs())
        .map(|x| {
            (0..outputs)
                .map(|y| dmc.transition(x, y).ln() - output_marginal[y].ln())
                .collect()
        })
        .collect();
    let ln_mm1 = m.ln_m_minus_one();

    let sample_one = |s: u64| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s);
        let mut counts = vec![0u32; outputs];
        let mut info = 0.0;
        for _ in 0..n {
            let x = draw(&mut rng, input_dist);
            let y = draw(&mut rng, &dmc.rows()[x]);
            counts[y] += 1;
            info += density[x][y];
        }
        let ln_tail = ln_prob_density_at_least(&counts, &density, input_dist, info);
        (ln_mm1 + ln_tail).min(0.0).exp()
    };

    let (sum, sum_sq) = (0..samples)
        .into_par_iter()
        .map(|s| {
            let v = sample_one(s);
            (v, v * v)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (v, v2)| (a + v, b + v2));
    let count = samples as f64;
    let mean = sum / count;
    let var = ((sum_sq / count - mean * mean) * count / (count - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        half_width: 1.96 * (var / count).sqrt(),
        samples,
    })
}

fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &q) in probs.iter().enumerate() {
        acc += q;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&q| q > 0.0).unwrap_or(0)
}

/// `ln P[sum_i density(Xbar_i, y_i) >= threshold]` with `Xbar_i` i.i.d. from
/// `input_dist`, given the output type `counts`. Exact up to merging atoms
/// that land on the same `DENSITY_GRID` cell.
fn ln_prob_density_at_least(
    counts: &[u32],
    density: &[Vec<f64>],
    input_dist: &[f64],
    threshold: f64,
) -> f64 {
    let key = |v: f64| (v / DENSITY_GRID).round() as i64;
    // atoms keyed by quantized value; entries hold (value, ln mass)
    let mut dist: BTreeMap<i64, (f64, f64)> = BTreeMap::from([(0, (0.0, 0.0))]);
    for (y, &c) in counts.iter().enumerate() {
        let step: Vec<(f64, f64)> = input_dist
            .iter()
            .enumerate()
            .filter(|(x, q)| **q > 0.0 && density[*x][y].is_finite())
            .map(|(x, q)| (density[x][y], q.ln()))
            .collect();
        for _ in 0..c {
            let mut next: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
            for &(v, w) in dist.values() {
                for &(dv, dw) in &step {
                    let nv = v + dv;
                    let slot = next.entry(key(nv)).or_insert((nv, f64::NEG_INFINITY));
                    slot.1 = ln_add_exp(slot.1, w + dw);
                }
            }
            dist = next;
        }
    }
    let cut = key(threshold);
    ln_sum_exp(dist.range(cut..).map(|(_, &(_, w))| w))
}
