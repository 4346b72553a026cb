use rayon::prelude::*;

use super::space::SearchBox;
use super::{better, inner_scan, verified_point, InnerBest, Method, OptProblem, OptResult};
use crate::channel::LogProb;
use crate::error::{Error, Result};

/// Full scan of an `L = 3` box, thresholds optimized at every point.
pub fn optimize_exhaustive(problem: &OptProblem) -> Result<OptResult> {
    problem.validate()?;
    if problem.l != 3 {
        return Err(Error::InvalidProblem(format!(
            "exhaustive search needs L = 3, got {}",
            problem.l
        )));
    }
    let space = SearchBox::new(&problem.search_box, problem.l)?;
    let volume = space.volume();
    if volume > u128::from(problem.budget) {
        return Err(Error::BoxTooLarge {
            volume,
            budget: problem.budget,
        });
    }
    let tables = problem.tables()?;
    let target = problem.eps_target.ln();
    let points = space.enumerate();
    let evaluated: Vec<InnerBest> = points
        .par_iter()
        .map(|t| inner_scan(&tables, t, target))
        .collect();

    let mut best: Option<usize> = None;
    let mut min_eps = f64::INFINITY;
    for (i, e) in evaluated.iter().enumerate() {
        min_eps = min_eps.min(e.ln_eps);
        let cand = (&e.objective(target), points[i].as_slice(), e.gammas.as_slice());
        let replace = match best {
            None => true,
            Some(b) => {
                let eb = &evaluated[b];
                better(cand, (&eb.objective(target), points[b].as_slice(), eb.gammas.as_slice()))
            }
        };
        if replace {
            best = Some(i);
        }
    }
    let best = best.filter(|&i| evaluated[i].feasible);
    let best = match best {
        Some(i) => Some(verified_point(problem, &points[i], &evaluated[i].gammas)?),
        None => None,
    };
    Ok(OptResult {
        method: Method::Exhaustive,
        evaluations: points.len() as u64,
        best,
        min_eps: LogProb::saturating(min_eps),
    })
}
