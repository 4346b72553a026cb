//! Exact rational reference computations.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub fn q(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

pub fn f(x: &BigRational) -> f64 {
    x.to_f64().unwrap()
}

pub fn choose(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

pub fn pow(x: &BigRational, e: u32) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..e {
        out *= x;
    }
    out
}

/// `P[K = k]` for `K ~ Binom(n, p)`.
pub fn pmf(n: u32, k: u32, p: &BigRational) -> BigRational {
    if k > n {
        return BigRational::zero();
    }
    BigRational::from_integer(choose(n, k)) * pow(p, k) * pow(&(BigRational::one() - p), n - k)
}

/// `sum_k P[K = k] min{1, (M - 1) sum_{j <= k} C(n, j) 2^-n}`.
pub fn rcu(n: u32, m: u64, p: &BigRational) -> BigRational {
    if n == 0 {
        return if m > 1 { BigRational::one() } else { BigRational::zero() };
    }
    let two_n = BigRational::from_integer(BigInt::from(2).pow(n));
    let mm1 = BigRational::from_integer(BigInt::from(m - 1));
    let mut ball = BigInt::zero();
    let mut total = BigRational::zero();
    for k in 0..=n {
        ball += choose(n, k);
        let frac = mm1.clone() * BigRational::from_integer(ball.clone()) / two_n.clone();
        let capped = if frac > BigRational::one() { BigRational::one() } else { frac };
        total += pmf(n, k, p) * capped;
    }
    total
}

/// Type-I error, type-II error and continuation factor of the threshold test
/// on `t'` confirmation symbols: reject when fewer than `gamma` accept-symbols
/// arrive, and with probability `lambda` at exactly `gamma`.
pub fn test_errors(t: u32, gamma: u32, lambda: &BigRational, p: &BigRational) -> (BigRational, BigRational, BigRational) {
    let one = BigRational::one();
    let accept = one.clone() - p;
    let mut eps = BigRational::zero();
    let mut beta = BigRational::zero();
    for w in 0..=t {
        let z = pmf(t, w, &accept);
        let tt = pmf(t, w, p);
        if w < gamma {
            eps += z;
        } else if w == gamma {
            eps += lambda.clone() * z;
            beta += (one.clone() - lambda) * tt;
        } else {
            beta += tt;
        }
    }
    let cont = if eps > one.clone() - &beta { eps.clone() } else { one - &beta };
    (eps, beta, cont)
}

/// Time and error bounds with survival terms clamped to the running minimum
/// of one and earlier terms.
pub fn bound(times: &[u32], m: u64, p: &BigRational, gammas: &[u32], lambdas: &[BigRational]) -> (BigRational, BigRational) {
    let l = times.len();
    let k = (l - 1) / 2;
    let at = |i: usize| -> u32 {
        if i == 0 {
            0
        } else if i > l {
            times[l - 1]
        } else {
            times[i - 1]
        }
    };
    let mut reach = BigRational::one();
    let mut eps = BigRational::zero();
    let mut n_bound = BigRational::from_integer(BigInt::from(at(2)));
    let mut survival = BigRational::one();
    let mut decoded = 0;
    for j in 1..=k {
        decoded += at(2 * j - 1) - at(2 * j - 2);
        let r = rcu(decoded, m, p);
        let (e, b, cont) = test_errors(at(2 * j) - at(2 * j - 1), gammas[j - 1], &lambdas[j - 1], p);
        eps += r.clone() * &b * &reach;
        let s = (r * (BigRational::one() - &b) + e) * &reach;
        if s < survival {
            survival = s;
        }
        let span = BigRational::from_integer(BigInt::from(at(2 * j + 2) - at(2 * j)));
        n_bound += span * &survival;
        reach *= cont;
    }
    decoded += at(2 * k + 1) - at(2 * k);
    eps += rcu(decoded, m, p) * reach;
    (eps, n_bound)
}
