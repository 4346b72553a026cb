//! Neyman–Pearson tests for the confirmation phases on the BSC.
//!
//! With control symbols `(x_A, x_R) = (1, 0)` the likelihood ratio is
//! monotone in the Hamming weight `w` of the received control block, so every
//! optimal test accepts when `w > gamma`, rejects when `w < gamma`, and at
//! `w == gamma` rejects with probability `lambda`.
//!
//! Under the accept hypothesis `w ~ Binom(t', 1 - p)`; under reject
//! `w ~ Binom(t', p)`. Hence
//!
//! ```text
//! type I  = P[Z < gamma] + lambda P[Z = gamma],        Z ~ Binom(t', 1 - p)
//! type II = P[T > gamma] + (1 - lambda) P[T = gamma],  T ~ Binom(t', p)
//! ```

use serde::{Deserialize, Serialize};

use crate::channel::{check_crossover, ln_add_exp, ln_sub_exp, BinomialDist, BinomialTable, LogProb};
use crate::error::{domain, Error, Result};

/// Randomized weight-threshold test on a confirmation block of length `t_prime`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestParams {
    pub t_prime: u32,
    pub gamma: u32,
    pub lambda: f64,
}

impl TestParams {
    pub fn new(t_prime: u32, gamma: u32, lambda: f64) -> Result<Self> {
        let p = Self {
            t_prime,
            gamma,
            lambda,
        };
        p.validate(0)?;
        Ok(p)
    }

    /// Deterministic threshold test (`lambda = 0`).
    pub fn threshold(t_prime: u32, gamma: u32) -> Result<Self> {
        Self::new(t_prime, gamma, 0.0)
    }

    pub(crate) fn validate(&self, index: usize) -> Result<()> {
        if self.t_prime == 0 {
            return Err(Error::InvalidTestParams {
                index,
                reason: "confirmation length must be positive".into(),
            });
        }
        if self.gamma > self.t_prime {
            return Err(Error::InvalidTestParams {
                index,
                reason: format!("gamma {} exceeds confirmation length {}", self.gamma, self.t_prime),
            });
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::InvalidTestParams {
                index,
                reason: format!("lambda {} outside [0, 1)", self.lambda),
            });
        }
        Ok(())
    }
}

/// Error probabilities of one confirmation test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestErrors {
    /// Rejecting although the estimate is correct.
    pub type_one: LogProb,
    /// Accepting although the estimate is wrong.
    pub type_two: LogProb,
    /// `1 - type_two`, summed directly rather than by subtraction.
    pub type_two_complement: LogProb,
    /// Continuation factor `max{type_one, 1 - type_two}`.
    pub p_cont: LogProb,
}

impl TestErrors {
    fn new(type_one: f64, type_two: f64, type_two_complement: f64) -> Self {
        let type_one = LogProb::saturating(type_one);
        let type_two_complement = LogProb::saturating(type_two_complement);
        Self {
            type_one,
            type_two: LogProb::saturating(type_two),
            type_two_complement,
            p_cont: type_one.max(type_two_complement),
        }
    }
}

/// Distribution tables for both hypotheses at a fixed confirmation length.
#[derive(Clone, Debug)]
pub struct ConfirmationTables {
    t_prime: u32,
    /// Weight under the accept hypothesis, `Binom(t', 1 - p)`.
    accept: BinomialTable,
    /// Weight under the reject hypothesis, `Binom(t', p)`.
    reject: BinomialTable,
}

impl ConfirmationTables {
    pub fn new(t_prime: u32, p: f64) -> Result<Self> {
        check_crossover(p)?;
        Ok(Self::new_unchecked(t_prime, p))
    }

    pub(crate) fn new_unchecked(t_prime: u32, p: f64) -> Self {
        Self {
            t_prime,
            accept: BinomialDist::new(t_prime, 1.0 - p).unwrap().table(),
            reject: BinomialDist::new(t_prime, p).unwrap().table(),
        }
    }

    pub fn t_prime(&self) -> u32 {
        self.t_prime
    }

    /// Errors of the randomized test `(gamma, lambda)`.
    pub fn errors(&self, gamma: u32, lambda: f64) -> TestErrors {
        let g = i64::from(gamma);
        let ln_lambda = lambda.ln();
        let ln_keep = (-lambda).ln_1p();
        let z_eq = self.accept.ln_pmf(g);
        let t_eq = self.reject.ln_pmf(g);
        let type_one = ln_add_exp(self.accept.ln_below(g), ln_lambda + z_eq);
        let type_two = ln_add_exp(self.reject.ln_above(g), ln_keep + t_eq);
        let type_two_c = ln_add_exp(self.reject.ln_below(g), ln_lambda + t_eq);
        TestErrors::new(type_one, type_two, type_two_c)
    }

    /// Deterministic threshold test errors; the hot path of the optimizer.
    #[inline]
    pub fn threshold_errors(&self, gamma: u32) -> TestErrors {
        let g = i64::from(gamma);
        TestErrors::new(
            self.accept.ln_below(g),
            ln_add_exp(self.reject.ln_above(g), self.reject.ln_pmf(g)),
            self.reject.ln_below(g),
        )
    }

    /// Unique `(gamma, lambda)` with `lambda in [0, 1)` attaining type-I error `eps`.
    pub fn solve_for_type_one(&self, eps: LogProb) -> (u32, f64) {
        let target = eps.ln();
        let snap = 1e-14 * target.abs().max(1.0);
        // largest gamma with P[Z < gamma] <= eps
        let gamma = (0..=self.t_prime)
            .rev()
            .find(|&g| self.accept.ln_below(i64::from(g)) <= target + snap)
            .unwrap_or(0);
        let below = self.accept.ln_below(i64::from(gamma));
        if below >= target - snap {
            return (gamma, 0.0);
        }
        let lambda = (ln_sub_exp(target, below) - self.accept.ln_pmf(i64::from(gamma))).exp();
        (gamma, lambda.clamp(0.0, 1.0 - f64::EPSILON))
    }
}

/// Type-I and type-II errors of the test `params` on BSC(p).
pub fn np_errors_from_params(params: TestParams, p: f64) -> Result<TestErrors> {
    check_crossover(p)?;
    params.validate(0)?;
    Ok(ConfirmationTables::new_unchecked(params.t_prime, p).errors(params.gamma, params.lambda))
}

/// `beta_eps(Bern(1-p)^t' || Bern(p)^t')`: the optimal test with type-I error
/// exactly `epsilon_target`, and its errors.
pub fn np_beta_for_epsilon(
    t_prime: u32,
    p: f64,
    epsilon_target: LogProb,
) -> Result<(TestParams, TestErrors)> {
    check_crossover(p)?;
    if t_prime == 0 {
        return Err(domain("t'", 0.0, "t' >= 1"));
    }
    if epsilon_target.is_zero() || epsilon_target.ln() >= 0.0 {
        return Err(domain("epsilon", epsilon_target.prob(), "(0, 1)"));
    }
    let tables = ConfirmationTables::new_unchecked(t_prime, p);
    let (gamma, lambda) = tables.solve_for_type_one(epsilon_target);
    let params = TestParams {
        t_prime,
        gamma,
        lambda,
    };
    Ok((params, tables.errors(gamma, lambda)))
}
