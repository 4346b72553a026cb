//! Achievability bounds for variable-length codes with bursty feedback.
//!
//! A VLBF code may receive unlimited-rate noiseless feedback at a handful of
//! scheduled times `n_1 < ... < n_L`. This crate evaluates an achievability
//! bound on the expected decoding time and error probability of such codes
//! over the binary symmetric channel, optimizes the feedback schedule and the
//! confirmation-test thresholds, and simulates the underlying
//! communication/confirmation scheme to check the bounds empirically.
//!
//! Modules, bottom up:
//!
//! * [`channel`]: log-domain probabilities, binomial tails, channel models.
//! * [`rcu`]: random-coding union bound.
//! * [`hyptest`]: Neyman–Pearson confirmation tests.
//! * [`bound`]: the time and error bounds for a given schedule.
//! * [`sim`]: Monte Carlo simulation of the coding scheme.
//! * [`opt`]: schedule and threshold optimization, rate sweeps.

pub mod bound;
pub mod channel;
mod error;
pub mod hyptest;
pub mod opt;
pub mod rcu;
pub mod sim;

pub use error::{Error, Result};
