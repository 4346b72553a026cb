//! Expected decoding time and error probability bounds for VLBF codes on the
//! BSC.
//!
//! A schedule `n_1 < ... < n_L` (odd `L = 2k + 1`) alternates `k + 1`
//! communication phases of lengths `t_i = n_{2i-1} - n_{2i-2}` with `k`
//! confirmation phases of lengths `t'_i = n_{2i} - n_{2i-1}`. With `rcu_j` the
//! RCU bound at the cumulative communication length after phase `j`, and
//! `P_j = prod_{i<j} p_i` the probability-of-reaching factor,
//!
//! ```text
//! eps <= sum_{j<=k} rcu_j beta_j P_j + rcu_{k+1} P_{k+1}
//! N   <= n_2 + sum_{j<=k} (n_{2j+2} - n_{2j}) S_j,   n_{2k+2} = n_L
//! S_j  = (rcu_j (1 - beta_j) + eps_j) P_j
//! ```
//!
//! `S_j` bounds `P[tau > n_{2j}]`. Reported values clamp `S_j` to the running
//! minimum of `1, S_1, ..., S_{j-1}` (a survival function is nonincreasing
//! and at most one) and clamp the error bound at one. Unclamped values are
//! kept alongside.

use serde::{Deserialize, Serialize};

use crate::channel::{check_crossover, extended_f64, ln_add_exp, ln_sum_exp_in_place, LogProb};
use crate::error::{domain, Error, Result};
use crate::hyptest::{np_beta_for_epsilon, ConfirmationTables, TestErrors, TestParams};
use crate::rcu::{ln_rcu_bsc, MessageCount};

/// Feedback times `n_1 < ... < n_L` with `L` odd and at least three.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct FeedbackSchedule {
    times: Vec<u32>,
}

impl TryFrom<Vec<u32>> for FeedbackSchedule {
    type Error = Error;
    fn try_from(times: Vec<u32>) -> Result<Self> {
        FeedbackSchedule::new(times)
    }
}

impl From<FeedbackSchedule> for Vec<u32> {
    fn from(s: FeedbackSchedule) -> Self {
        s.times
    }
}

impl FeedbackSchedule {
    /// Validates the schedule; errors name the 1-based offending index.
    pub fn new(times: Vec<u32>) -> Result<Self> {
        let l = times.len();
        if l < 3 || l.is_multiple_of(2) {
            return Err(Error::InvalidSchedule {
                index: l,
                reason: format!("need an odd number of at least 3 feedback times, got {l}"),
            });
        }
        if times[0] == 0 {
            return Err(Error::InvalidSchedule {
                index: 1,
                reason: "feedback times must be positive".into(),
            });
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSchedule {
                index: i + 2,
                reason: format!(
                    "n_{} = {} is not greater than n_{} = {}",
                    i + 2,
                    times[i + 1],
                    i + 1,
                    times[i]
                ),
            });
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[u32] {
        &self.times
    }

    /// `L`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of confirmation phases `k = (L - 1) / 2`.
    pub fn confirmations(&self) -> usize {
        (self.times.len() - 1) / 2
    }

    /// `n_i` with `n_0 = 0` and `n_{L+1} = n_L`.
    pub fn time(&self, i: usize) -> u32 {
        match i {
            0 => 0,
            i if i > self.times.len() => self.last(),
            i => self.times[i - 1],
        }
    }

    pub fn last(&self) -> u32 {
        *self.times.last().unwrap()
    }

    /// Communication lengths `t_1, ..., t_{k+1}`.
    pub fn communication_lengths(&self) -> Vec<u32> {
        (1..=self.confirmations() + 1)
            .map(|i| self.time(2 * i - 1) - self.time(2 * i - 2))
            .collect()
    }

    /// Confirmation lengths `t'_1, ..., t'_k`.
    pub fn confirmation_lengths(&self) -> Vec<u32> {
        (1..=self.confirmations())
            .map(|i| self.time(2 * i) - self.time(2 * i - 1))
            .collect()
    }

    /// Cumulative communication lengths `sum_{i<=j} t_i` for `j = 1..=k+1`.
    pub fn cumulative_communication(&self) -> Vec<u32> {
        self.communication_lengths()
            .iter()
            .scan(0, |acc, t| {
                *acc += t;
                Some(*acc)
            })
            .collect()
    }

    /// Possible stopping times `n_2, n_4, ..., n_{2k}, n_{2k+1}`.
    pub fn stopping_times(&self) -> Vec<u32> {
        let mut v: Vec<u32> = (1..=self.confirmations()).map(|j| self.time(2 * j)).collect();
        v.push(self.last());
        v
    }
}

/// Quantities of confirmation phase `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTerms {
    /// 1-based phase index.
    pub phase: usize,
    /// Communication symbols the decoder has seen when this phase starts.
    pub decoded_length: u32,
    pub rcu: LogProb,
    pub test: TestParams,
    pub type_one: LogProb,
    pub type_two: LogProb,
    pub p_cont: LogProb,
    /// Bound on `P[tau > n_{2j}]` as used in the time bound.
    pub survival: LogProb,
    /// The same bound before clamping, as a natural log (may exceed zero).
    #[serde(with = "extended_f64")]
    pub survival_ln_raw: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalPhase {
    pub decoded_length: u32,
    pub rcu: LogProb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clamping {
    /// Some survival bound was replaced by a smaller earlier one (or by one).
    pub survival: bool,
    /// The error bound exceeded one.
    pub eps: bool,
}

/// Evaluated time and error bounds with all per-phase intermediates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub schedule: FeedbackSchedule,
    pub m: MessageCount,
    pub p: f64,
    pub n_bound: f64,
    pub eps_bound: LogProb,
    pub n_bound_raw: f64,
    #[serde(with = "extended_f64")]
    pub eps_bound_ln_raw: f64,
    pub clamped: Clamping,
    pub phases: Vec<PhaseTerms>,
    pub final_phase: FinalPhase,
}

impl BoundResult {
    pub fn rate(&self) -> Result<f64> {
        rate_of(self.m, self.n_bound)
    }
}

/// `log2 M / N`.
pub fn rate_of(m: MessageCount, n_bound: f64) -> Result<f64> {
    if !(n_bound > 0.0) {
        return Err(domain("N", n_bound, "(0, inf)"));
    }
    Ok(m.log2() / n_bound)
}

/// `(N bound, ln eps bound)` after clamping; the optimizer's objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub n_bound: f64,
    pub ln_eps: f64,
}

/// Shared arithmetic of the two bounds. `ln_rcu` has `k + 1` entries and
/// `errors` has `k`. `scratch` is reused across calls to avoid allocation.
pub(crate) fn score(
    times: &[u32],
    ln_rcu: &[f64],
    errors: &[TestErrors],
    scratch: &mut Vec<f64>,
) -> Score {
    let k = errors.len();
    debug_assert_eq!(ln_rcu.len(), k + 1);
    let time = |i: usize| -> f64 {
        if i > times.len() {
            f64::from(times[times.len() - 1])
        } else {
            f64::from(times[i - 1])
        }
    };
    scratch.clear();
    let mut reach = 0.0;
    let mut survival = 0.0f64;
    let mut n_bound = time(2);
    for (j, e) in errors.iter().enumerate() {
        let j1 = j + 1;
        scratch.push(ln_rcu[j] + e.type_two.ln() + reach);
        let raw = ln_add_exp(ln_rcu[j] + e.type_two_complement.ln(), e.type_one.ln()) + reach;
        survival = survival.min(raw);
        n_bound += (time(2 * j1 + 2) - time(2 * j1)) * survival.exp();
        reach += e.p_cont.ln();
    }
    scratch.push(ln_rcu[k] + reach);
    let ln_eps = ln_sum_exp_in_place(scratch).min(0.0);
    Score { n_bound, ln_eps }
}

fn assemble(
    schedule: &FeedbackSchedule,
    m: MessageCount,
    p: f64,
    ln_rcu: &[f64],
    tests: &[TestParams],
    errors: &[TestErrors],
) -> BoundResult {
    let k = schedule.confirmations();
    let cumulative = schedule.cumulative_communication();
    let mut eps_terms = Vec::with_capacity(k + 1);
    let mut phases = Vec::with_capacity(k);
    let mut reach = 0.0;
    let mut survival = 0.0f64;
    let mut n_bound = f64::from(schedule.time(2));
    let mut n_bound_raw = n_bound;
    let mut survival_clamped = false;
    for j in 1..=k {
        let e = errors[j - 1];
        let rcu = ln_rcu[j - 1];
        eps_terms.push(rcu + e.type_two.ln() + reach);
        let raw = ln_add_exp(rcu + e.type_two_complement.ln(), e.type_one.ln()) + reach;
        if raw > survival {
            survival_clamped = true;
        }
        survival = survival.min(raw);
        let span = f64::from(schedule.time(2 * j + 2) - schedule.time(2 * j));
        n_bound += span * survival.exp();
        n_bound_raw += span * raw.exp();
        phases.push(PhaseTerms {
            phase: j,
            decoded_length: cumulative[j - 1],
            rcu: LogProb::saturating(rcu),
            test: tests[j - 1],
            type_one: e.type_one,
            type_two: e.type_two,
            p_cont: e.p_cont,
            survival: LogProb::saturating(survival),
            survival_ln_raw: raw,
        });
        reach += e.p_cont.ln();
    }
    eps_terms.push(ln_rcu[k] + reach);
    let eps_raw = ln_sum_exp_in_place(&mut eps_terms);
    BoundResult {
        schedule: schedule.clone(),
        m,
        p,
        n_bound,
        eps_bound: LogProb::saturating(eps_raw),
        n_bound_raw,
        eps_bound_ln_raw: eps_raw,
        clamped: Clamping {
            survival: survival_clamped,
            eps: eps_raw > 0.0,
        },
        phases,
        final_phase: FinalPhase {
            decoded_length: cumulative[k],
            rcu: LogProb::saturating(ln_rcu[k]),
        },
    }
}

/// Evaluates both bounds for threshold tests `(gammas[j], lambdas[j])`.
pub fn evaluate_theorem1(
    schedule: &FeedbackSchedule,
    m: MessageCount,
    p: f64,
    gammas: &[u32],
    lambdas: &[f64],
) -> Result<BoundResult> {
    check_crossover(p)?;
    let k = schedule.confirmations();
    if gammas.len() != k || lambdas.len() != k {
        return Err(Error::InvalidTestParams {
            index: gammas.len().min(lambdas.len()) + 1,
            reason: format!(
                "schedule has {k} confirmation phases but got {} gammas and {} lambdas",
                gammas.len(),
                lambdas.len()
            ),
        });
    }
    let tests = schedule
        .confirmation_lengths()
        .into_iter()
        .zip(gammas.iter().zip(lambdas))
        .enumerate()
        .map(|(j, (t_prime, (&gamma, &lambda)))| {
            let t = TestParams {
                t_prime,
                gamma,
                lambda,
            };
            t.validate(j + 1).map(|_| t)
        })
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<TestErrors> = tests
        .iter()
        .map(|t| ConfirmationTables::new_unchecked(t.t_prime, p).errors(t.gamma, t.lambda))
        .collect();
    let ln_mm1 = m.ln_m_minus_one();
    let ln_rcu: Vec<f64> = schedule
        .cumulative_communication()
        .into_iter()
        .map(|n| ln_rcu_bsc(n, ln_mm1, p))
        .collect();
    Ok(assemble(schedule, m, p, &ln_rcu, &tests, &errors))
}

/// Like [`evaluate_theorem1`], with each test given by its type-I error and
/// the optimal randomized test solved for.
pub fn evaluate_with_type_one_targets(
    schedule: &FeedbackSchedule,
    m: MessageCount,
    p: f64,
    eps_targets: &[LogProb],
) -> Result<BoundResult> {
    let k = schedule.confirmations();
    if eps_targets.len() != k {
        return Err(Error::InvalidTestParams {
            index: eps_targets.len() + 1,
            reason: format!("schedule has {k} confirmation phases but got {} targets", eps_targets.len()),
        });
    }
    let mut gammas = Vec::with_capacity(k);
    let mut lambdas = Vec::with_capacity(k);
    for (j, (t_prime, eps)) in schedule
        .confirmation_lengths()
        .into_iter()
        .zip(eps_targets)
        .enumerate()
    {
        let (params, _) = np_beta_for_epsilon(t_prime, p, *eps).map_err(|e| Error::InvalidTestParams {
            index: j + 1,
            reason: e.to_string(),
        })?;
        gammas.push(params.gamma);
        lambdas.push(params.lambda);
    }
    evaluate_theorem1(schedule, m, p, &gammas, &lambdas)
}

/// Precomputed RCU values and confirmation tables for one `(M, p)` pair,
/// covering blocklengths up to `max_n`. Shared read-only by optimizer threads.
#[derive(Clone, Debug)]
pub struct BoundTables {
    m: MessageCount,
    p: f64,
    ln_rcu: Vec<f64>,
    confirmations: Vec<ConfirmationTables>,
}

impl BoundTables {
    pub fn new(m: MessageCount, p: f64, max_n: u32) -> Result<Self> {
        check_crossover(p)?;
        let ln_mm1 = m.ln_m_minus_one();
        let ln_rcu = (0..=max_n)
            .map(|n| match n {
                // rcu(0, M) = min{1, M - 1}
                0 if m.is_single() => f64::NEG_INFINITY,
                0 => 0.0,
                n => ln_rcu_bsc(n, ln_mm1, p),
            })
            .collect();
        let confirmations = (0..=max_n)
            .map(|t| ConfirmationTables::new_unchecked(t, p))
            .collect();
        Ok(Self {
            m,
            p,
            ln_rcu,
            confirmations,
        })
    }

    pub fn m(&self) -> MessageCount {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn max_n(&self) -> u32 {
        (self.ln_rcu.len() - 1) as u32
    }

    pub fn ln_rcu(&self, n: u32) -> f64 {
        self.ln_rcu[n as usize]
    }

    pub fn confirmation(&self, t_prime: u32) -> &ConfirmationTables {
        &self.confirmations[t_prime as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyptest::np_errors_from_params;
    use crate::rcu::rcu_bsc;

    fn sched(t: &[u32]) -> FeedbackSchedule {
        FeedbackSchedule::new(t.to_vec()).unwrap()
    }

    fn two() -> MessageCount {
        MessageCount::exact(2).unwrap()
    }

    #[test]
    fn schedule_validation_names_index() {
        assert!(matches!(
            FeedbackSchedule::new(vec![2, 4]),
            Err(Error::InvalidSchedule { .. })
        ));
        assert!(matches!(
            FeedbackSchedule::new(vec![2, 4, 6, 8]),
            Err(Error::InvalidSchedule { .. })
        ));
        assert!(matches!(
            FeedbackSchedule::new(vec![0, 4, 6]),
            Err(Error::InvalidSchedule { index: 1, .. })
        ));
        assert!(matches!(
            FeedbackSchedule::new(vec![2, 4, 4]),
            Err(Error::InvalidSchedule { index: 3, .. })
        ));
        assert!(matches!(
            FeedbackSchedule::new(vec![3, 2, 6, 7, 9]),
            Err(Error::InvalidSchedule { index: 2, .. })
        ));
        assert!(serde_json::from_str::<FeedbackSchedule>("[5, 4, 6]").is_err());
    }

    #[test]
    fn derived_lengths() {
        let s = sched(&[8, 12, 20, 24, 40]);
        assert_eq!(s.confirmations(), 2);
        assert_eq!(s.communication_lengths(), vec![8, 8, 16]);
        assert_eq!(s.confirmation_lengths(), vec![4, 4]);
        assert_eq!(s.cumulative_communication(), vec![8, 16, 32]);
        assert_eq!(s.stopping_times(), vec![12, 24, 40]);
        assert_eq!(s.time(0), 0);
        assert_eq!(s.time(6), 40);
    }

    #[test]
    fn single_message_case() {
        let r = evaluate_theorem1(&sched(&[2, 4, 6]), MessageCount::exact(1).unwrap(), 0.11, &[1], &[0.0])
            .unwrap();
        assert!(r.eps_bound.is_zero());
        assert!((r.n_bound - 4.0242).abs() < 1e-12, "{}", r.n_bound);
    }

    #[test]
    fn hand_example() {
        let r = evaluate_theorem1(&sched(&[2, 4, 6]), two(), 0.11, &[1], &[0.0]).unwrap();
        // exact rational transcription: 0.0742151025 + 0.1427930170301875
        assert!((r.eps_bound.prob() - 0.217_008_119_530_187_5).abs() < 1e-14);
        assert!((r.n_bound - 4.589_719_795).abs() < 1e-12);
        let ph = &r.phases[0];
        assert!((ph.rcu.prob() - 0.356975).abs() < 1e-14);
        assert!((ph.type_two.prob() - 0.2079).abs() < 1e-15);
        assert!((ph.type_one.prob() - 0.0121).abs() < 1e-16);
        assert!((ph.p_cont.prob() - 0.7921).abs() < 1e-15);
        assert!((r.final_phase.rcu.prob() - 0.180_271_451_875).abs() < 1e-14);
        assert_eq!(r.final_phase.decoded_length, 4);
        assert!(!r.clamped.survival && !r.clamped.eps);
        assert!((r.rate().unwrap() - 1.0 / 4.589_719_795).abs() < 1e-12);
    }

    #[test]
    fn accept_always_tests() {
        let s = sched(&[3, 5, 9, 10, 14]);
        let m = MessageCount::exact(8).unwrap();
        let r = evaluate_theorem1(&s, m, 0.11, &[0, 0], &[0.0, 0.0]).unwrap();
        // p_cont = 0: only the first phase contributes
        let rcu1 = rcu_bsc(3, m, 0.11).unwrap().value.prob();
        assert!((r.eps_bound.prob() - rcu1).abs() < 1e-15);
        assert_eq!(r.n_bound, 5.0);
        for ph in &r.phases {
            assert!(ph.survival.is_zero());
        }
    }

    #[test]
    fn bad_test_params_name_phase() {
        let s = sched(&[3, 5, 9, 10, 14]);
        let m = two();
        assert!(matches!(
            evaluate_theorem1(&s, m, 0.11, &[1, 2], &[0.0, 0.0]),
            Err(Error::InvalidTestParams { index: 2, .. })
        ));
        assert!(matches!(
            evaluate_theorem1(&s, m, 0.11, &[1, 1], &[0.0, 1.0]),
            Err(Error::InvalidTestParams { index: 2, .. })
        ));
        assert!(evaluate_theorem1(&s, m, 0.11, &[1], &[0.0]).is_err());
        assert!(evaluate_theorem1(&s, m, 0.0, &[1, 1], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn rate_examples() {
        let m = |x: f64| MessageCount::from_log2(x).unwrap();
        assert_eq!(rate_of(m(4.0), 8.0).unwrap(), 0.5);
        assert_eq!(rate_of(m(0.0), 13.0).unwrap(), 0.0);
        assert_eq!(rate_of(m(160.0), 400.0).unwrap(), 0.4);
        assert!(rate_of(m(4.0), 0.0).is_err());
        assert!(rate_of(m(4.0), -1.0).is_err());
    }

    #[test]
    fn type_one_targets_wrapper() {
        let eps = LogProb::from_prob(0.0121).unwrap();
        let a = evaluate_with_type_one_targets(&sched(&[2, 4, 6]), two(), 0.11, &[eps]).unwrap();
        let b = evaluate_theorem1(&sched(&[2, 4, 6]), two(), 0.11, &[1], &[0.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn survival_clamping_is_reported() {
        // A second test that rejects almost always (gamma = t') makes the raw
        // second survival bound larger than the first.
        let s = sched(&[20, 24, 26, 31, 40]);
        let m = MessageCount::exact(4).unwrap();
        let r = evaluate_theorem1(&s, m, 0.11, &[2, 5], &[0.0, 0.0]).unwrap();
        assert!(r.phases[1].survival_ln_raw > r.phases[0].survival_ln_raw);
        assert!(r.clamped.survival);
        assert_eq!(r.phases[1].survival, r.phases[0].survival);
        assert!(r.n_bound < r.n_bound_raw);
        let r = evaluate_theorem1(&s, m, 0.11, &[2, 1], &[0.0, 0.0]).unwrap();
        assert!(!r.clamped.survival);
        assert_eq!(r.n_bound, r.n_bound_raw);
    }

    #[test]
    fn score_matches_assembled_result() {
        let s = sched(&[5, 7, 12, 15, 21]);
        let m = MessageCount::exact(16).unwrap();
        let tables = BoundTables::new(m, 0.11, 21).unwrap();
        let mut scratch = Vec::new();
        for g1 in 0..=2 {
            for g2 in 0..=3 {
                let r = evaluate_theorem1(&s, m, 0.11, &[g1, g2], &[0.0, 0.0]).unwrap();
                let errors = [
                    tables.confirmation(2).threshold_errors(g1),
                    tables.confirmation(3).threshold_errors(g2),
                ];
                let ln_rcu = [tables.ln_rcu(5), tables.ln_rcu(10), tables.ln_rcu(16)];
                let sc = score(s.times(), &ln_rcu, &errors, &mut scratch);
                assert_eq!(sc.n_bound, r.n_bound);
                assert_eq!(sc.ln_eps, r.eps_bound.ln());
                let direct = np_errors_from_params(TestParams::threshold(3, g2).unwrap(), 0.11).unwrap();
                assert_eq!(direct, errors[1]);
            }
        }
    }

    #[test]
    fn json_snapshot_contains_intermediates() {
        let r = evaluate_theorem1(&sched(&[2, 4, 6]), MessageCount::exact(1).unwrap(), 0.11, &[1], &[0.0])
            .unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["schedule"], serde_json::json!([2, 4, 6]));
        assert_eq!(v["eps_bound"], "-inf");
        assert!(v["phases"][0]["type_two"].is_number());
        assert!(v["clamped"]["survival"].is_boolean());
        let back: BoundResult = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
