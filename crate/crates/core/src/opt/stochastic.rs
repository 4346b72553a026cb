//! Multistart integer pattern search with an optional surrogate stage.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::SearchBox;
use super::surrogate::{dist, Rbf};
use super::{better, inner_scan, verified_point, InnerBest, Method, OptProblem, OptResult};
use crate::bound::BoundTables;
use crate::channel::LogProb;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticOptions {
    /// Uniformly sampled starting schedules.
    pub restarts: usize,
    pub seed: u64,
    /// Spend leftover budget on surrogate-proposed candidates.
    pub surrogate: bool,
    pub surrogate_rounds: usize,
    /// Extra starting schedules, searched before the random ones.
    #[serde(default)]
    pub starts: Vec<Vec<u32>>,
}

impl Default for StochasticOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            surrogate: true,
            surrogate_rounds: 100,
            starts: Vec::new(),
        }
    }
}

pub fn optimize_stochastic(problem: &OptProblem, restarts: usize, seed: u64) -> Result<OptResult> {
    optimize_stochastic_with(
        problem,
        &StochasticOptions {
            restarts,
            seed,
            ..StochasticOptions::default()
        },
    )
}

pub fn optimize_stochastic_with(problem: &OptProblem, options: &StochasticOptions) -> Result<OptResult> {
    problem.validate()?;
    let space = SearchBox::new(&problem.search_box, problem.l)?;
    let mut search = Search {
        tables: problem.tables()?,
        target: problem.eps_target.ln(),
        space,
        memo: HashMap::new(),
        budget_left: problem.budget,
        evaluations: 0,
        best: None,
        min_eps: f64::INFINITY,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let initial_step = search
        .space
        .ranges()
        .iter()
        .map(|r| (r.1 - r.0) / 4)
        .max()
        .unwrap_or(1)
        .max(1);

    let mut starts: Vec<Vec<u32>> = options
        .starts
        .iter()
        .filter(|s| search.space.contains(s))
        .cloned()
        .collect();
    starts.extend((0..options.restarts).map(|_| search.space.sample(&mut rng)));
    for s in starts {
        if search.budget_left == 0 {
            break;
        }
        search.pattern_search(s, initial_step);
    }
    if options.surrogate {
        search.surrogate_stage(&mut rng, options.surrogate_rounds);
    }

    let best = match &search.best {
        Some(t) if search.memo[t].feasible => Some(verified_point(problem, t, &search.memo[t].gammas)?),
        _ => None,
    };
    Ok(OptResult {
        method: Method::Stochastic,
        evaluations: search.evaluations,
        best,
        min_eps: LogProb::saturating(search.min_eps),
    })
}

struct Search {
    tables: BoundTables,
    target: f64,
    space: SearchBox,
    memo: HashMap<Vec<u32>, InnerBest>,
    budget_left: u64,
    evaluations: u64,
    best: Option<Vec<u32>>,
    min_eps: f64,
}

impl Search {
    fn beats(&self, a: &[u32], b: &[u32]) -> bool {
        let (ea, eb) = (&self.memo[a], &self.memo[b]);
        better(
            (&ea.objective(self.target), a, &ea.gammas),
            (&eb.objective(self.target), b, &eb.gammas),
        )
    }

    /// Evaluates the new candidates in order until the budget runs out.
    fn evaluate(&mut self, candidates: &[Vec<u32>]) {
        let mut fresh: Vec<Vec<u32>> = Vec::new();
        for c in candidates {
            if fresh.len() as u64 >= self.budget_left {
                break;
            }
            if !self.memo.contains_key(c) && !fresh.contains(c) {
                fresh.push(c.clone());
            }
        }
        let results: Vec<InnerBest> = fresh
            .par_iter()
            .map(|t| inner_scan(&self.tables, t, self.target))
            .collect();
        self.budget_left -= fresh.len() as u64;
        self.evaluations += fresh.len() as u64;
        for (t, r) in fresh.into_iter().zip(results) {
            self.min_eps = self.min_eps.min(r.ln_eps);
            self.memo.insert(t.clone(), r);
            if self.best.as_ref().is_none_or(|b| self.beats(&t, b)) {
                self.best = Some(t);
            }
        }
    }

    fn neighbors(&self, x: &[u32], step: u32) -> Vec<Vec<u32>> {
        let l = x.len();
        let mut out = Vec::with_capacity(4 * l);
        for i in 0..l {
            for up in [false, true] {
                // one coordinate
                let mut y = x.to_vec();
                // the gap g_i, shifting every later time with it
                let mut z = x.to_vec();
                let ok = if up {
                    y[i] = y[i].saturating_add(step);
                    z[i..].iter_mut().for_each(|v| *v = v.saturating_add(step));
                    true
                } else if y[i] > step {
                    y[i] -= step;
                    z[i..].iter_mut().for_each(|v| *v -= step);
                    true
                } else {
                    false
                };
                if ok {
                    for c in [y, z] {
                        if self.space.contains(&c) && !out.contains(&c) {
                            out.push(c);
                        }
                    }
                }
            }
        }
        out
    }

    /// Best-improvement descent with step halving; returns the local optimum.
    fn pattern_search(&mut self, start: Vec<u32>, initial_step: u32) -> Vec<u32> {
        self.evaluate(std::slice::from_ref(&start));
        if !self.memo.contains_key(&start) {
            return start;
        }
        let mut x = start;
        let mut step = initial_step;
        loop {
            let cands = self.neighbors(&x, step);
            self.evaluate(&cands);
            let mut next: Option<&Vec<u32>> = None;
            for c in cands.iter().filter(|c| self.memo.contains_key(*c)) {
                if next.is_none_or(|n| self.beats(c, n)) {
                    next = Some(c);
                }
            }
            match next {
                Some(n) if self.beats(n, &x) => x = n.clone(),
                _ if step > 1 => step /= 2,
                _ => break,
            }
            if self.budget_left == 0 {
                break;
            }
        }
        x
    }

    /// Proposes points minimizing a merit that mixes the RBF prediction with
    /// distance from evaluated points, cycling the weight toward exploitation.
    fn surrogate_stage(&mut self, rng: &mut ChaCha8Rng, rounds: usize) {
        const WEIGHTS: [f64; 4] = [0.3, 0.5, 0.8, 0.95];
        const MAX_FIT: usize = 200;
        let l = self.space.dims();
        let scale = f64::from(self.space.ranges()[l - 1].1);
        let widths: Vec<f64> = self.space.ranges().iter().map(|r| f64::from(r.1 - r.0)).collect();
        for round in 0..rounds {
            if self.budget_left == 0 {
                return;
            }
            let Some(best) = self.best.clone() else { return };
            let mut feasible: Vec<(&Vec<u32>, f64)> = self
                .memo
                .iter()
                .filter(|(_, e)| e.feasible)
                .map(|(t, e)| (t, e.n_bound))
                .collect();
            if feasible.len() < l + 2 {
                return;
            }
            feasible.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
            feasible.truncate(MAX_FIT);
            let norm = |t: &[u32]| -> Vec<f64> { t.iter().map(|&v| f64::from(v) / scale).collect() };
            let pts: Vec<Vec<f64>> = feasible.iter().map(|(t, _)| norm(t)).collect();
            let vals: Vec<f64> = feasible.iter().map(|(_, v)| *v).collect();
            let Some(rbf) = Rbf::fit(&pts, &vals) else { return };

            let radius = [0.2, 0.1, 0.05, 0.025][round % 4];
            let mut cands: Vec<Vec<u32>> = Vec::new();
            for _ in 0..200 {
                let guess: Vec<f64> = best
                    .iter()
                    .zip(&widths)
                    .map(|(&b, w)| f64::from(b) + rng.random_range(-1.0..=1.0) * radius * w.max(1.0))
                    .collect();
                cands.push(self.space.project(&guess));
            }
            for _ in 0..50 {
                cands.push(self.space.sample(rng));
            }
            cands.sort();
            cands.dedup();
            cands.retain(|c| !self.memo.contains_key(c));
            if cands.is_empty() {
                continue;
            }
            let preds: Vec<f64> = cands.iter().map(|c| rbf.predict(&norm(c))).collect();
            let gaps: Vec<f64> = cands
                .iter()
                .map(|c| {
                    let x = norm(c);
                    pts.iter().map(|p| dist(p, &x)).fold(f64::INFINITY, f64::min)
                })
                .collect();
            let span = |v: &[f64]| {
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, (hi - lo).max(1e-300))
            };
            let (plo, pspan) = span(&preds);
            let (glo, gspan) = span(&gaps);
            let w = WEIGHTS[round % WEIGHTS.len()];
            let mut pick = 0;
            let mut pick_merit = f64::INFINITY;
            for i in 0..cands.len() {
                let merit = w * (preds[i] - plo) / pspan + (1.0 - w) * (1.0 - (gaps[i] - glo) / gspan);
                if merit < pick_merit {
                    pick_merit = merit;
                    pick = i;
                }
            }
            let chosen = cands.swap_remove(pick);
            let before = self.best.clone();
            self.evaluate(std::slice::from_ref(&chosen));
            if self.best != before {
                self.pattern_search(chosen, 1);
            }
        }
    }
}
