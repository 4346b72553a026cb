use serde::{Deserialize, Serialize};

use super::space::SearchBox;
use super::{
    optimize_exhaustive, optimize_stochastic_with, Method, OptPoint, OptProblem, StochasticOptions,
    DEFAULT_BOX_FACTOR, DEFAULT_BUDGET, DEFAULT_MIN_BOX,
};
use crate::channel::LogProb;
use crate::error::Result;
use crate::rcu::MessageCount;

/// Settings shared by every point of a rate curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTemplate {
    pub budget: u64,
    pub restarts: usize,
    pub seed: u64,
    pub box_factor: f64,
    pub min_box: u32,
    pub surrogate: bool,
}

impl Default for SweepTemplate {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            restarts: 8,
            seed: 0,
            box_factor: DEFAULT_BOX_FACTOR,
            min_box: DEFAULT_MIN_BOX,
            surrogate: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub log2m: f64,
    pub method: Method,
    pub evaluations: u64,
    /// `None` marks a gap: nothing in the box met the target.
    pub point: Option<OptPoint>,
    pub rate: Option<f64>,
    pub min_eps: LogProb,
}

/// Optimizes one point per `log2 M`, feasible points sorted by time bound and
/// gaps after them in input order. `L = 3` boxes that fit the budget are
/// searched exhaustively; otherwise the stochastic search runs, warm-started
/// from the previous feasible schedule scaled by the ratio of `log2 M`.
pub fn sweep_rate_curve(
    p: f64,
    eps_target: LogProb,
    l: usize,
    log2m_list: &[f64],
    template: &SweepTemplate,
) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::with_capacity(log2m_list.len());
    let mut prev: Option<(f64, Vec<u32>)> = None;
    for (i, &log2m) in log2m_list.iter().enumerate() {
        let m = MessageCount::from_log2(log2m)?;
        let mut problem =
            OptProblem::with_default_box(m, p, eps_target, l, template.box_factor, template.min_box)?;
        problem.budget = template.budget;
        let space = SearchBox::new(&problem.search_box, l)?;
        let result = if l == 3 && space.volume() <= u128::from(template.budget) {
            optimize_exhaustive(&problem)?
        } else {
            let starts = match &prev {
                Some((prev_log2m, times)) if *prev_log2m > 0.0 => {
                    let ratio = log2m / prev_log2m;
                    let guess: Vec<f64> = times.iter().map(|&t| f64::from(t) * ratio).collect();
                    vec![space.project(&guess)]
                }
                _ => Vec::new(),
            };
            optimize_stochastic_with(
                &problem,
                &StochasticOptions {
                    restarts: template.restarts,
                    seed: template.seed.wrapping_add(i as u64),
                    surrogate: template.surrogate,
                    starts,
                    ..StochasticOptions::default()
                },
            )?
        };
        if let Some(pt) = &result.best {
            prev = Some((log2m, pt.schedule.times().to_vec()));
        }
        let rate = result.best.as_ref().map(|pt| pt.bound.rate()).transpose()?;
        out.push(CurvePoint {
            log2m,
            method: result.method,
            evaluations: result.evaluations,
            point: result.best,
            rate,
            min_eps: result.min_eps,
        });
    }
    // stable sort keeps gaps in input order
    out.sort_by(|a, b| match (&a.point, &b.point) {
        (Some(x), Some(y)) => x
            .bound
            .n_bound
            .total_cmp(&y.bound.n_bound)
            .then_with(|| a.log2m.total_cmp(&b.log2m)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::bsc_capacity;

    fn lp(x: f64) -> LogProb {
        LogProb::from_prob(x).unwrap()
    }

    #[test]
    fn zero_log2m_has_zero_rate() {
        let c = sweep_rate_curve(0.11, lp(1e-3), 3, &[0.0], &SweepTemplate::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].rate, Some(0.0));
        assert_eq!(c[0].point.as_ref().unwrap().bound.n_bound, 2.0);
    }

    #[test]
    fn small_curve_below_capacity_and_reproducible() {
        let t = SweepTemplate {
            budget: 2000,
            ..SweepTemplate::default()
        };
        let a = sweep_rate_curve(0.11, lp(1e-3), 3, &[4.0, 6.0, 8.0], &t).unwrap();
        let b = sweep_rate_curve(0.11, lp(1e-3), 3, &[4.0, 6.0, 8.0], &t).unwrap();
        assert_eq!(a, b);
        let cap = bsc_capacity(0.11).unwrap();
        for pt in &a {
            let r = pt.rate.unwrap();
            assert!(r > 0.0 && r < cap);
        }
        assert!(a.windows(2).all(|w| {
            w[0].point.as_ref().unwrap().bound.n_bound <= w[1].point.as_ref().unwrap().bound.n_bound
        }));
    }

    #[test]
    fn gaps_come_last() {
        let t = SweepTemplate {
            budget: 200,
            min_box: 6,
            box_factor: 0.1,
            ..SweepTemplate::default()
        };
        let c = sweep_rate_curve(0.11, lp(1e-12), 3, &[4.0, 0.0], &t).unwrap();
        assert!(c[0].point.is_some());
        assert_eq!(c[0].log2m, 0.0);
        assert!(c[1].point.is_none() && c[1].rate.is_none());
    }
}
