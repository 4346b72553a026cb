//! Monte Carlo simulation of the communication/confirmation coding scheme.
//!
//! Each trial draws a fresh random codebook and message, then runs the
//! protocol symbol by symbol. The transmitter only learns anything from the
//! receiver at the scheduled feedback times: after a communication phase it
//! learns the receiver's current estimate, after a confirmation phase it learns
//! whether the receiver rejected. The receiver decodes by maximum likelihood
//! on all communication-phase outputs so far and never looks at
//! confirmation-phase outputs when decoding.
//!
//! Trial `i` draws every random quantity from stream `i` of a ChaCha8
//! generator keyed by the master seed, so results are identical for any
//! thread count or evaluation order.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::bound::{BoundResult, FeedbackSchedule};
use crate::channel::{select_control_symbols, Bsc, Dmc};
use crate::error::{Error, Result};

/// Largest codebook the simulator accepts.
pub const MAX_SIM_MESSAGES: u32 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    Bsc(Bsc),
    Dmc(Dmc),
}

impl ChannelModel {
    fn inputs(&self) -> usize {
        match self {
            ChannelModel::Bsc(_) => 2,
            ChannelModel::Dmc(d) => d.inputs(),
        }
    }

    /// `(x_A, x_R)`.
    pub fn control_symbols(&self) -> Result<(usize, usize)> {
        match self {
            ChannelModel::Bsc(_) => Ok(Bsc::CONTROL_SYMBOLS),
            ChannelModel::Dmc(d) => select_control_symbols(d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub schedule: FeedbackSchedule,
    pub m: u32,
    pub channel: ChannelModel,
    pub gammas: Vec<u32>,
    /// Defaults to all zeros.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > MAX_SIM_MESSAGES {
            return Err(Error::InvalidConfig(format!(
                "m = {} outside [1, {MAX_SIM_MESSAGES}]",
                self.m
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        let k = self.schedule.confirmations();
        if self.gammas.len() != k {
            return Err(Error::InvalidConfig(format!(
                "{} gammas for {k} confirmation phases",
                self.gammas.len()
            )));
        }
        if !self.lambdas.is_empty() && self.lambdas.len() != k {
            return Err(Error::InvalidConfig(format!(
                "{} lambdas for {k} confirmation phases",
                self.lambdas.len()
            )));
        }
        for (j, (g, t)) in self.gammas.iter().zip(self.schedule.confirmation_lengths()).enumerate() {
            if *g > t {
                return Err(Error::InvalidTestParams {
                    index: j + 1,
                    reason: format!("gamma {g} exceeds confirmation length {t}"),
                });
            }
        }
        if let Some(j) = self.lambdas.iter().position(|l| !(0.0..1.0).contains(l)) {
            return Err(Error::InvalidTestParams {
                index: j + 1,
                reason: format!("lambda {} outside [0, 1)", self.lambdas[j]),
            });
        }
        self.channel.control_symbols()?;
        Ok(())
    }

    fn lambda(&self, j: usize) -> f64 {
        self.lambdas.get(j).copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub error: bool,
    pub tau: u32,
}

/// Feedback deliveries observed by the transmitter during one trial.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeedbackAudit {
    /// Channel-use indices at which feedback reached the transmitter.
    pub delivery_times: Vec<u32>,
    /// Number of symbols the transmitter emitted.
    pub emitted: u32,
}

#[derive(Clone, Copy, Debug)]
enum Feedback {
    Estimate(usize),
    Reject,
}

#[derive(Clone, Copy, Debug)]
enum TxMode {
    Communicate,
    Confirm { accept: bool },
}

/// Encoder: a function of the message, the codebook and delivered feedback.
struct Transmitter<'a> {
    codebook: &'a [u8],
    codeword_len: usize,
    message: usize,
    control: (usize, usize),
    next_symbol: usize,
    mode: TxMode,
    feedback_times: &'a [u32],
    audit: Option<FeedbackAudit>,
}

impl Transmitter<'_> {
    fn emit(&mut self) -> usize {
        if let Some(a) = self.audit.as_mut() {
            a.emitted += 1;
        }
        match self.mode {
            TxMode::Communicate => {
                let x = self.codebook[self.message * self.codeword_len + self.next_symbol];
                self.next_symbol += 1;
                usize::from(x)
            }
            TxMode::Confirm { accept: true } => self.control.0,
            TxMode::Confirm { accept: false } => self.control.1,
        }
    }

    fn deliver(&mut self, at: u32, fb: Feedback) {
        assert!(
            self.feedback_times.binary_search(&at).is_ok(),
            "feedback delivered at n = {at}, outside the schedule"
        );
        if let Some(a) = self.audit.as_mut() {
            a.delivery_times.push(at);
        }
        self.mode = match fb {
            Feedback::Estimate(w) => TxMode::Confirm {
                accept: w == self.message,
            },
            Feedback::Reject => TxMode::Communicate,
        };
    }
}

/// ML decoder state: per-codeword metric over communication outputs.
enum Metrics {
    /// BSC: Hamming distances (smaller is better).
    Hamming(Vec<u32>),
    /// General DMC: log-likelihoods (larger is better).
    LogLik(Vec<f64>),
}

struct Receiver<'a> {
    codebook: &'a [u8],
    codeword_len: usize,
    m: usize,
    received: usize,
    metrics: Metrics,
    log_transition: Option<Vec<Vec<f64>>>,
}

impl Receiver<'_> {
    fn observe(&mut self, y: usize) {
        let pos = self.received;
        self.received += 1;
        match &mut self.metrics {
            Metrics::Hamming(d) => {
                for (w, dist) in d.iter_mut().enumerate() {
                    *dist += u32::from(usize::from(self.codebook[w * self.codeword_len + pos]) != y);
                }
            }
            Metrics::LogLik(ll) => {
                let table = self.log_transition.as_ref().unwrap();
                for (w, v) in ll.iter_mut().enumerate() {
                    *v += table[usize::from(self.codebook[w * self.codeword_len + pos])][y];
                }
            }
        }
    }

    /// ML estimate; ties broken uniformly by reservoir sampling.
    fn decode(&self, rng: &mut ChaCha8Rng) -> usize {
        let mut best = 0;
        let mut ties = 0u32;
        match &self.metrics {
            Metrics::Hamming(d) => {
                let min = *d.iter().min().unwrap();
                for (w, &v) in d.iter().enumerate() {
                    if v == min {
                        ties += 1;
                        if ties == 1 || rng.random_range(0..ties) == 0 {
                            best = w;
                        }
                    }
                }
            }
            Metrics::LogLik(ll) => {
                let max = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let tol = 1e-9 * max.abs().max(1.0);
                for (w, &v) in ll.iter().enumerate() {
                    if v >= max - tol {
                        ties += 1;
                        if ties == 1 || rng.random_range(0..ties) == 0 {
                            best = w;
                        }
                    }
                }
            }
        }
        debug_assert!(best < self.m);
        best
    }
}

fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

fn draw_codebook(rng: &mut ChaCha8Rng, inputs: usize, len: usize) -> Vec<u8> {
    if inputs == 2 {
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            let bits = rng.next_u64();
            let take = (len - out.len()).min(64);
            out.extend((0..take).map(|b| ((bits >> b) & 1) as u8));
        }
        out
    } else {
        (0..len).map(|_| rng.random_range(0..inputs) as u8).collect()
    }
}

fn run(config: &SimConfig, trial_index: u64, audit: bool) -> (TrialOutcome, Option<FeedbackAudit>) {
    let schedule = &config.schedule;
    let k = schedule.confirmations();
    let comm = schedule.communication_lengths();
    let conf = schedule.confirmation_lengths();
    let codeword_len: usize = comm.iter().map(|&t| t as usize).sum();
    let m = config.m as usize;
    let inputs = config.channel.inputs();
    let control = config.channel.control_symbols().expect("validated config");

    let mut rng = trial_rng(config.master_seed, trial_index);
    let codebook = draw_codebook(&mut rng, inputs, m * codeword_len);
    let message = rng.random_range(0..m);

    let (metrics, log_transition, favors_accept): (Metrics, Option<Vec<Vec<f64>>>, Vec<bool>) =
        match &config.channel {
            ChannelModel::Bsc(_) => (Metrics::Hamming(vec![0; m]), None, vec![false, true]),
            ChannelModel::Dmc(d) => {
                let table = d
                    .rows()
                    .iter()
                    .map(|r| r.iter().map(|v| v.ln()).collect())
                    .collect();
                let favors = (0..d.outputs())
                    .map(|y| d.transition(control.0, y) > d.transition(control.1, y))
                    .collect();
                (Metrics::LogLik(vec![0.0; m]), Some(table), favors)
            }
        };

    let mut tx = Transmitter {
        codebook: &codebook,
        codeword_len,
        message,
        control,
        next_symbol: 0,
        mode: TxMode::Communicate,
        feedback_times: schedule.times(),
        audit: audit.then(FeedbackAudit::default),
    };
    let mut rx = Receiver {
        codebook: &codebook,
        codeword_len,
        m,
        received: 0,
        metrics,
        log_transition,
    };

    let mut n = 0u32;
    for phase in 0..=k {
        for _ in 0..comm[phase] {
            n += 1;
            let x = tx.emit();
            let y = transmit(&config.channel, x, &mut rng);
            rx.observe(y);
        }
        let estimate = rx.decode(&mut rng);
        if phase == k {
            let outcome = TrialOutcome {
                error: estimate != message,
                tau: n,
            };
            return (outcome, tx.audit);
        }
        tx.deliver(n, Feedback::Estimate(estimate));

        let mut weight = 0u32;
        for _ in 0..conf[phase] {
            n += 1;
            let x = tx.emit();
            let y = transmit(&config.channel, x, &mut rng);
            weight += u32::from(favors_accept[y]);
        }
        let u: f64 = rng.random();
        let gamma = config.gammas[phase];
        let accept = weight > gamma || (weight == gamma && u >= config.lambda(phase));
        if accept {
            let outcome = TrialOutcome {
                error: estimate != message,
                tau: n,
            };
            return (outcome, tx.audit);
        }
        tx.deliver(n, Feedback::Reject);
    }
    unreachable!("the final communication phase always stops")
}

fn transmit(channel: &ChannelModel, x: usize, rng: &mut ChaCha8Rng) -> usize {
    match channel {
        ChannelModel::Bsc(b) => {
            let flip = rng.random::<f64>() < b.p();
            x ^ usize::from(flip)
        }
        ChannelModel::Dmc(d) => {
            let u: f64 = rng.random();
            let row = &d.rows()[x];
            let mut acc = 0.0;
            for (y, &q) in row.iter().enumerate() {
                acc += q;
                if u < acc {
                    return y;
                }
            }
            row.iter().rposition(|&q| q > 0.0).unwrap()
        }
    }
}

/// One complete transmission.
pub fn run_trial(config: &SimConfig, trial_index: u64) -> Result<TrialOutcome> {
    config.validate()?;
    Ok(run(config, trial_index, false).0)
}

/// [`run_trial`] with the transmitter's feedback deliveries recorded.
pub fn run_trial_audited(config: &SimConfig, trial_index: u64) -> Result<(TrialOutcome, FeedbackAudit)> {
    config.validate()?;
    let (outcome, audit) = run(config, trial_index, true);
    Ok((outcome, audit.unwrap()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TauCount {
    pub tau: u32,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub trial_count: u64,
    pub error_count: u64,
    pub empirical_error: f64,
    /// 95% Clopper–Pearson interval.
    pub error_interval: (f64, f64),
    pub empirical_mean_tau: f64,
    pub tau_std: f64,
    /// 95% normal-approximation interval.
    pub mean_tau_interval: (f64, f64),
    pub tau_histogram: Vec<TauCount>,
    pub master_seed: u64,
}

#[derive(Default, Clone)]
struct Tally {
    errors: u64,
    trials: u64,
    tau_sum: u128,
    tau_sq_sum: u128,
    histogram: Vec<u64>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.errors += other.errors;
        self.trials += other.trials;
        self.tau_sum += other.tau_sum;
        self.tau_sq_sum += other.tau_sq_sum;
        if self.histogram.len() < other.histogram.len() {
            self.histogram.resize(other.histogram.len(), 0);
        }
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        self
    }
}

/// Runs `config.trials` independent trials in parallel.
pub fn simulate(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let support = config.schedule.stopping_times();
    let tally = (0..config.trials)
        .into_par_iter()
        .fold(
            || Tally {
                histogram: vec![0; support.len()],
                ..Tally::default()
            },
            |mut t, i| {
                let (o, _) = run(config, i, false);
                t.trials += 1;
                t.errors += u64::from(o.error);
                t.tau_sum += u128::from(o.tau);
                t.tau_sq_sum += u128::from(o.tau) * u128::from(o.tau);
                let slot = support
                    .iter()
                    .position(|&s| s == o.tau)
                    .expect("stopping time outside the schedule's support");
                t.histogram[slot] += 1;
                t
            },
        )
        .reduce(Tally::default, Tally::merge);
    Ok(report(config, &support, tally))
}

fn report(config: &SimConfig, support: &[u32], tally: Tally) -> SimReport {
    let n = tally.trials as f64;
    let mean = tally.tau_sum as f64 / n;
    let var = if tally.trials > 1 {
        ((tally.tau_sq_sum as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let std = var.sqrt();
    let half = 1.96 * std / n.sqrt();
    SimReport {
        trial_count: tally.trials,
        error_count: tally.errors,
        empirical_error: tally.errors as f64 / n,
        error_interval: clopper_pearson(tally.errors, tally.trials, 0.05),
        empirical_mean_tau: mean,
        tau_std: std,
        mean_tau_interval: (mean - half, mean + half),
        tau_histogram: support
            .iter()
            .zip(&tally.histogram)
            .map(|(&tau, &count)| TauCount { tau, count })
            .collect(),
        master_seed: config.master_seed,
    }
}

/// Exact binomial confidence interval at level `1 - alpha`.
pub fn clopper_pearson(successes: u64, trials: u64, alpha: f64) -> (f64, f64) {
    let (x, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x).unwrap().inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Writes `trial_index,tau,error` rows for the first `limit` trials.
pub fn write_trace<W: Write>(config: &SimConfig, limit: u64, mut out: W) -> Result<()> {
    config.validate()?;
    let io = |e: std::io::Error| Error::InvalidConfig(format!("trace output: {e}"));
    writeln!(out, "trial_index,tau,error").map_err(io)?;
    for i in 0..limit.min(config.trials) {
        let (o, _) = run(config, i, false);
        writeln!(out, "{i},{},{}", o.tau, u8::from(o.error)).map_err(io)?;
    }
    Ok(())
}

/// Verdict of comparing a simulation against the analytic bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub eps_bound: f64,
    pub eps_limit: f64,
    pub error_ok: bool,
    pub n_bound: f64,
    pub tau_limit: f64,
    pub tau_ok: bool,
    pub support_ok: bool,
    pub pass: bool,
}

/// Statistical slack, in standard deviations, allowed above each bound.
pub const BOUND_CHECK_SIGMAS: f64 = 5.0;

/// `empirical_error <= eps + 5 sigma_binomial(eps)` and
/// `mean tau <= N + 5 sigma(tau) / sqrt(trials)`, plus the support check.
pub fn check_against_bound(report: &SimReport, bound: &BoundResult) -> BoundCheck {
    let trials = report.trial_count as f64;
    let eps = bound.eps_bound.prob();
    let eps_limit = eps + BOUND_CHECK_SIGMAS * (eps * (1.0 - eps) / trials).sqrt();
    let tau_limit = bound.n_bound + BOUND_CHECK_SIGMAS * report.tau_std / trials.sqrt();
    let support = bound.schedule.stopping_times();
    let support_ok = report.tau_histogram.iter().all(|c| support.contains(&c.tau))
        && report.tau_histogram.iter().map(|c| c.count).sum::<u64>() == report.trial_count;
    let error_ok = report.empirical_error <= eps_limit;
    let tau_ok = report.empirical_mean_tau <= tau_limit;
    BoundCheck {
        eps_bound: eps,
        eps_limit,
        error_ok,
        n_bound: bound.n_bound,
        tau_limit,
        tau_ok,
        support_ok,
        pass: error_ok && tau_ok && support_ok,
    }
}
