//! Schedule and threshold optimization of the time bound under an error
//! constraint.
//!
//! Every optimizer searches integer feedback times `n_1 < ... < n_L` inside a
//! per-coordinate box. For each candidate schedule the thresholds are chosen
//! by [`inner_gamma_opt`], a full scan of the `gamma` grid with `lambda = 0`.
//! Returned results are re-evaluated through [`evaluate_theorem1`].

mod exhaustive;
mod space;
mod stochastic;
mod surrogate;
mod sweep;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::bound::{evaluate_theorem1, score, BoundResult, BoundTables, FeedbackSchedule};
use crate::channel::{bsc_capacity, check_crossover, LogProb};
use crate::error::{Error, Result};
use crate::hyptest::TestErrors;
use crate::rcu::MessageCount;

pub use exhaustive::optimize_exhaustive;
pub use space::SearchBox;
pub use stochastic::{optimize_stochastic, optimize_stochastic_with, StochasticOptions};
pub use sweep::{sweep_rate_curve, CurvePoint, SweepTemplate};

/// Default evaluation budget.
pub const DEFAULT_BUDGET: u64 = 10_000;
/// Default box: `n_i <= ceil(DEFAULT_BOX_FACTOR * (log2 M + log2(1/eps)) / C)`.
pub const DEFAULT_BOX_FACTOR: f64 = 4.0;
/// Smallest upper edge of the default box.
pub const DEFAULT_MIN_BOX: u32 = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptProblem {
    pub m: MessageCount,
    pub p: f64,
    pub eps_target: LogProb,
    pub l: usize,
    /// Inclusive `(lo, hi)` range for each `n_i`.
    pub search_box: Vec<(u32, u32)>,
    /// Maximum number of distinct schedules evaluated.
    pub budget: u64,
}

impl OptProblem {
    /// Problem over the default box `n_i in [i, H - L + i]` with
    /// `H = max(ceil(box_factor * (log2 M + log2(1/eps)) / C(p)), min_box)`.
    /// The decoded length has to carry roughly `log2 M + log2(1/eps)` bits.
    pub fn with_default_box(
        m: MessageCount,
        p: f64,
        eps_target: LogProb,
        l: usize,
        box_factor: f64,
        min_box: u32,
    ) -> Result<Self> {
        check_crossover(p)?;
        let cap = bsc_capacity(p)?;
        let bits = m.log2() - eps_target.ln() / std::f64::consts::LN_2;
        let scaled = (box_factor * bits / cap).ceil();
        if !(scaled < f64::from(u32::MAX / 2)) {
            return Err(Error::InvalidProblem(format!("default box edge {scaled} is too large")));
        }
        let hi = (scaled as u32).max(min_box).max(l as u32);
        let search_box = (0..l as u32).map(|i| (i + 1, hi - l as u32 + i + 1)).collect();
        let problem = Self {
            m,
            p,
            eps_target,
            l,
            search_box,
            budget: DEFAULT_BUDGET,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        check_crossover(self.p)?;
        if self.l < 3 || self.l.is_multiple_of(2) {
            return Err(Error::InvalidProblem(format!("L = {} must be odd and at least 3", self.l)));
        }
        if self.eps_target.is_zero() || self.eps_target.ln() >= 0.0 {
            return Err(Error::InvalidProblem(format!(
                "eps_target {} outside (0, 1)",
                self.eps_target
            )));
        }
        if self.budget == 0 {
            return Err(Error::InvalidProblem("budget must be positive".into()));
        }
        SearchBox::new(&self.search_box, self.l).map(|_| ())
    }

    fn tables(&self) -> Result<BoundTables> {
        let max_n = self.search_box.iter().map(|r| r.1).max().unwrap_or(0);
        BoundTables::new(self.m, self.p, max_n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exhaustive,
    Stochastic,
}

/// A feasible optimized configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptPoint {
    pub schedule: FeedbackSchedule,
    pub gammas: Vec<u32>,
    pub bound: BoundResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub method: Method,
    pub evaluations: u64,
    /// `None` when no evaluated schedule met the target.
    pub best: Option<OptPoint>,
    /// Smallest error bound seen over all evaluated configurations.
    pub min_eps: LogProb,
}

impl OptResult {
    pub fn is_feasible(&self) -> bool {
        self.best.is_some()
    }
}

/// Outcome of the threshold scan for one schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum InnerOutcome {
    Feasible { gammas: Vec<u32>, bound: BoundResult },
    Infeasible { gammas: Vec<u32>, min_eps: LogProb },
}

/// Best thresholds (`lambda = 0`) for a fixed schedule: the smallest time
/// bound among grid points with error bound at most `eps_target`, ties going
/// to the lexicographically smallest `gammas`.
pub fn inner_gamma_opt(
    schedule: &FeedbackSchedule,
    m: MessageCount,
    p: f64,
    eps_target: LogProb,
) -> Result<InnerOutcome> {
    let tables = BoundTables::new(m, p, schedule.last())?;
    let best = inner_scan(&tables, schedule.times(), eps_target.ln());
    if best.feasible {
        let bound = evaluate_theorem1(schedule, m, p, &best.gammas, &vec![0.0; best.gammas.len()])?;
        Ok(InnerOutcome::Feasible {
            gammas: best.gammas,
            bound,
        })
    } else {
        Ok(InnerOutcome::Infeasible {
            gammas: best.gammas,
            min_eps: LogProb::saturating(best.ln_eps),
        })
    }
}

/// Result of scanning the threshold grid of one schedule.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct InnerBest {
    pub gammas: Vec<u32>,
    pub n_bound: f64,
    pub ln_eps: f64,
    pub feasible: bool,
}

impl InnerBest {
    pub fn objective(&self, target_ln: f64) -> Objective {
        if self.feasible {
            Objective::Feasible(self.n_bound)
        } else {
            Objective::Infeasible(self.ln_eps - target_ln)
        }
    }
}

/// Search objective: every feasible point beats every infeasible one, and
/// infeasible points are ranked by how far their error bound overshoots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Objective {
    Feasible(f64),
    Infeasible(f64),
}

impl Objective {
    pub fn cmp(&self, other: &Objective) -> Ordering {
        match (self, other) {
            (Objective::Feasible(a), Objective::Feasible(b)) => a.total_cmp(b),
            (Objective::Infeasible(a), Objective::Infeasible(b)) => a.total_cmp(b),
            (Objective::Feasible(_), Objective::Infeasible(_)) => Ordering::Less,
            (Objective::Infeasible(_), Objective::Feasible(_)) => Ordering::Greater,
        }
    }
}

/// Scans every `gamma` vector in lexicographic order.
pub(crate) fn inner_scan(tables: &BoundTables, times: &[u32], target_ln: f64) -> InnerBest {
    let l = times.len();
    let k = (l - 1) / 2;
    let at = |i: usize| if i == 0 { 0 } else { times[i - 1] };
    let mut ln_rcu = Vec::with_capacity(k + 1);
    let mut decoded = 0;
    for j in 1..=k + 1 {
        decoded += at(2 * j - 1) - at(2 * j - 2);
        ln_rcu.push(tables.ln_rcu(decoded));
    }
    let grids: Vec<Vec<TestErrors>> = (1..=k)
        .map(|j| {
            let c = tables.confirmation(at(2 * j) - at(2 * j - 1));
            (0..=c.t_prime()).map(|g| c.threshold_errors(g)).collect()
        })
        .collect();

    let mut idx = vec![0usize; k];
    let mut errors: Vec<TestErrors> = grids.iter().map(|g| g[0]).collect();
    let mut scratch = Vec::with_capacity(k + 1);
    let mut best_feasible: Option<(f64, Vec<usize>)> = None;
    let mut best_infeasible: Option<(f64, Vec<usize>)> = None;
    loop {
        let s = score(times, &ln_rcu, &errors, &mut scratch);
        if s.ln_eps <= target_ln {
            if best_feasible.as_ref().is_none_or(|(n, _)| s.n_bound < *n) {
                best_feasible = Some((s.n_bound, idx.clone()));
            }
        } else if best_feasible.is_none() && best_infeasible.as_ref().is_none_or(|(e, _)| s.ln_eps < *e) {
            best_infeasible = Some((s.ln_eps, idx.clone()));
        }
        // odometer, last coordinate fastest
        let mut pos = k;
        loop {
            if pos == 0 {
                return finish(times, &ln_rcu, &grids, best_feasible, best_infeasible);
            }
            pos -= 1;
            if idx[pos] + 1 < grids[pos].len() {
                idx[pos] += 1;
                errors[pos] = grids[pos][idx[pos]];
                break;
            }
            idx[pos] = 0;
            errors[pos] = grids[pos][0];
        }
    }
}

fn finish(
    times: &[u32],
    ln_rcu: &[f64],
    grids: &[Vec<TestErrors>],
    feasible: Option<(f64, Vec<usize>)>,
    infeasible: Option<(f64, Vec<usize>)>,
) -> InnerBest {
    let (idx, is_feasible) = match (feasible, infeasible) {
        (Some((_, idx)), _) => (idx, true),
        (None, Some((_, idx))) => (idx, false),
        (None, None) => unreachable!("the threshold grid is never empty"),
    };
    let errors: Vec<TestErrors> = idx.iter().zip(grids).map(|(&i, g)| g[i]).collect();
    let s = score(times, ln_rcu, &errors, &mut Vec::new());
    InnerBest {
        gammas: idx.iter().map(|&i| i as u32).collect(),
        n_bound: s.n_bound,
        ln_eps: s.ln_eps,
        feasible: is_feasible,
    }
}

/// Re-evaluates a search winner through the public bound evaluator.
pub(crate) fn verified_point(
    problem: &OptProblem,
    times: &[u32],
    gammas: &[u32],
) -> Result<OptPoint> {
    let schedule = FeedbackSchedule::new(times.to_vec())?;
    let bound = evaluate_theorem1(&schedule, problem.m, problem.p, gammas, &vec![0.0; gammas.len()])?;
    if bound.eps_bound.ln() > problem.eps_target.ln() {
        return Err(Error::InvalidProblem(format!(
            "re-evaluated error bound {} exceeds target {} for schedule {times:?}",
            bound.eps_bound, problem.eps_target
        )));
    }
    Ok(OptPoint {
        schedule,
        gammas: gammas.to_vec(),
        bound,
    })
}

/// Lexicographic order on `(objective, times, gammas)`.
pub(crate) fn better(
    a: (&Objective, &[u32], &[u32]),
    b: (&Objective, &[u32], &[u32]),
) -> bool {
    a.0.cmp(b.0).then_with(|| a.1.cmp(b.1)).then_with(|| a.2.cmp(b.2)) == Ordering::Less
}
