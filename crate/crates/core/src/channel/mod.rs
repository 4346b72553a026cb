//! Channel models, log-domain numerics and binomial machinery.

mod binomial;
mod dmc;
mod logprob;

pub use binomial::{
    binary_entropy, bsc_capacity, ln_binom_coeff, log_binom_pmf, log_binom_tail, BinomialDist,
    BinomialTable,
};
pub use dmc::{
    check_crossover, select_control_symbols, sequence_log_likelihood, Bsc, Dmc, DmcFile,
};
pub use logprob::{extended_f64, ln_add_exp, ln_one_minus_exp, ln_sub_exp, ln_sum_exp, ln_sum_exp_in_place, LogProb};
