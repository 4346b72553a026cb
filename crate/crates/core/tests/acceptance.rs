//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any hard criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vlbf_core::bound::{evaluate_theorem1, FeedbackSchedule};
use vlbf_core::channel::{Bsc, LogProb};
use vlbf_core::hyptest::np_beta_for_epsilon;
use vlbf_core::opt::{
    inner_gamma_opt, optimize_exhaustive, optimize_stochastic, sweep_rate_curve, InnerOutcome, OptProblem,
    SweepTemplate,
};
use vlbf_core::rcu::{rcu_bsc, MessageCount};
use vlbf_core::sim::{check_against_bound, simulate, ChannelModel, SimConfig};

const RCU_REL_TOL: f64 = 1e-12;
const RCU_ANCHOR_2: f64 = 0.356975;
const RCU_ANCHOR_4: f64 = 0.1802715;
const RCU_ANCHOR_4_TOL: f64 = 5e-8;

const NP_LAMBDA_GRID: u32 = 10_000;
const NP_BETA_TOL: f64 = 1e-10;
const NP_ROUND_TRIP_REL_TOL: f64 = 1e-12;

const ANCHOR_EPS: f64 = 0.2170178;
const ANCHOR_EPS_TOL: f64 = 1e-6;
const ANCHOR_N: f64 = 4.58972;
const ANCHOR_N_TOL: f64 = 1e-4;
const ANCHOR_EXACT_REL_TOL: f64 = 1e-12;

const SIM_TRIALS: u64 = 1_000_000;

const OPT_PROBLEMS: usize = 20;
const OPT_REQUIRED: usize = 18;
const OPT_REL_GAP: f64 = 0.05;
const OPT_STOCHASTIC_BUDGET: u64 = 300;
const OPT_RESTARTS: usize = 8;

const CAPACITY_BITS: f64 = 0.50009;

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn report(id: &str, hard: bool, start: Instant, v: &Verdict) -> bool {
    let tag = if v.pass { "PASS" } else if hard { "FAIL" } else { "SOFT-FAIL" };
    println!("criterion {id}: {tag} ({:.1}s) {}", start.elapsed().as_secs_f64(), v.detail);
    v.pass || !hard
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn rcu_exactness() -> Verdict {
    let mut worst: f64 = 0.0;
    for p in [0.11, 0.3] {
        let pq = common::q(p);
        for m in [2u64, 4, 8] {
            for n in 1..=12 {
                let ours = rcu_bsc(n, MessageCount::exact(m).unwrap(), p).unwrap().value.prob();
                let exact = common::f(&common::rcu(n, m, &pq));
                worst = worst.max(rel(ours, exact));
            }
        }
    }
    let two = MessageCount::exact(2).unwrap();
    let a2 = rcu_bsc(2, two, 0.11).unwrap().value.prob();
    let a4 = rcu_bsc(4, two, 0.11).unwrap().value.prob();
    let pass = worst <= RCU_REL_TOL && rel(a2, RCU_ANCHOR_2) <= RCU_REL_TOL && (a4 - RCU_ANCHOR_4).abs() <= RCU_ANCHOR_4_TOL;
    Verdict {
        pass,
        detail: format!("max rel err {worst:.2e}; rcu(2)={a2:.12}; rcu(4)={a4:.12}"),
    }
}

fn binom_pmfs(t: u32, q: f64) -> Vec<f64> {
    (0..=t)
        .map(|k| {
            let c = (0..k).fold(1.0, |c, i| c * f64::from(t - i) / f64::from(i + 1));
            c * q.powi(k as i32) * (1.0 - q).powi((t - k) as i32)
        })
        .collect()
}

// Type-I and type-II errors of "reject below gamma, reject with probability
// lambda at gamma", from direct sums.
fn direct_errors(accept: &[f64], reject: &[f64], gamma: u32, lambda: f64) -> (f64, f64) {
    let g = gamma as usize;
    let below: f64 = accept[..g].iter().sum();
    let above: f64 = reject[g + 1..].iter().sum();
    (below + lambda * accept[g], above + (1.0 - lambda) * reject[g])
}

fn np_optimality() -> Verdict {
    let mut worst_beta: f64 = 0.0;
    let mut worst_trip: f64 = 0.0;
    let mut cases = 0;
    for p in [0.11, 0.3] {
        for t in 1..=10u32 {
            let accept = binom_pmfs(t, 1.0 - p);
            let reject = binom_pmfs(t, p);
            for eps in [0.5, 0.1, 0.0121, 1e-3] {
                let (params, errors) = np_beta_for_epsilon(t, p, LogProb::from_prob(eps).unwrap()).unwrap();
                worst_trip = worst_trip.max(rel(errors.type_one.prob(), eps));
                let mut best = f64::INFINITY;
                for gamma in 0..=t {
                    let below: f64 = accept[..gamma as usize].iter().sum();
                    let solved = ((eps - below) / accept[gamma as usize]).clamp(0.0, 1.0);
                    let grid = (0..NP_LAMBDA_GRID).map(|k| f64::from(k) / f64::from(NP_LAMBDA_GRID));
                    for lambda in grid.chain(std::iter::once(solved)) {
                        let (a, b) = direct_errors(&accept, &reject, gamma, lambda);
                        if a <= eps * (1.0 + 1e-12) {
                            best = best.min(b);
                        }
                    }
                }
                let ours = errors.type_two.prob();
                let (_, b_direct) = direct_errors(&accept, &reject, params.gamma, params.lambda);
                worst_beta = worst_beta.max((ours - best).abs()).max((ours - b_direct).abs());
                cases += 1;
            }
        }
    }
    Verdict {
        pass: worst_beta <= NP_BETA_TOL && worst_trip <= NP_ROUND_TRIP_REL_TOL,
        detail: format!("{cases} cases; max |beta diff| {worst_beta:.2e}; max eps round-trip rel {worst_trip:.2e}"),
    }
}

fn theorem_anchor() -> Verdict {
    let schedule = FeedbackSchedule::new(vec![2, 4, 6]).unwrap();
    let b = evaluate_theorem1(&schedule, MessageCount::exact(2).unwrap(), 0.11, &[1], &[0.0]).unwrap();
    let eps = b.eps_bound.prob();
    let (eps_exact, n_exact) = common::bound(&[2, 4, 6], 2, &common::q(0.11), &[1], &[BigRational::from_float(0.0).unwrap()]);
    let (eps_exact, n_exact) = (common::f(&eps_exact), common::f(&n_exact));
    let literal_eps = (eps - ANCHOR_EPS).abs() <= ANCHOR_EPS_TOL;
    let literal_n = (b.n_bound - ANCHOR_N).abs() <= ANCHOR_N_TOL;
    let exact = rel(eps, eps_exact) <= ANCHOR_EXACT_REL_TOL && rel(b.n_bound, n_exact) <= ANCHOR_EXACT_REL_TOL;
    Verdict {
        pass: literal_eps && literal_n && exact,
        detail: format!(
            "eps={eps:.10} (want {ANCHOR_EPS}+-{ANCHOR_EPS_TOL}: {}), n={:.8} (want {ANCHOR_N}+-{ANCHOR_N_TOL}: {}), exact transcription eps={eps_exact:.16} n={n_exact:.12}: {}",
            ok(literal_eps),
            b.n_bound,
            ok(literal_n),
            ok(exact)
        ),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "off"
    }
}

fn sim_case(times: &[u32], m: u32, p: f64, gammas: &[u32], seed: u64) -> (bool, String) {
    let config = SimConfig {
        schedule: FeedbackSchedule::new(times.to_vec()).unwrap(),
        m,
        channel: ChannelModel::Bsc(Bsc::new(p).unwrap()),
        gammas: gammas.to_vec(),
        lambdas: vec![],
        trials: SIM_TRIALS,
        master_seed: seed,
    };
    let r = simulate(&config).unwrap();
    let lambdas = vec![0.0; gammas.len()];
    let b = evaluate_theorem1(&config.schedule, MessageCount::exact(u64::from(m)).unwrap(), p, gammas, &lambdas).unwrap();
    let v = check_against_bound(&r, &b);
    (
        v.pass,
        format!(
            "{times:?} M={m} g={gammas:?}: err {:.3e} <= {:.3e}: {}, tau {:.4} <= {:.4}: {}, support: {}",
            r.empirical_error,
            v.eps_limit,
            ok(v.error_ok),
            r.empirical_mean_tau,
            v.tau_limit,
            ok(v.tau_ok),
            ok(v.support_ok)
        ),
    )
}

fn simulation_validity() -> Verdict {
    let (a, da) = sim_case(&[2, 4, 6], 2, 0.11, &[1], 1);
    let times = [8, 12, 20, 24, 40];
    let m = 16;
    let schedule = FeedbackSchedule::new(times.to_vec()).unwrap();
    let target = LogProb::from_prob(1e-2).unwrap();
    let gammas = match inner_gamma_opt(&schedule, MessageCount::exact(m).unwrap(), 0.11, target).unwrap() {
        InnerOutcome::Feasible { gammas, .. } => gammas,
        InnerOutcome::Infeasible { .. } => {
            return Verdict {
                pass: false,
                detail: "L=5 configuration infeasible at eps 1e-2".into(),
            }
        }
    };
    let (b, db) = sim_case(&times, m as u32, 0.11, &gammas, 2);
    Verdict {
        pass: a && b,
        detail: format!("{SIM_TRIALS} trials each; {da}; {db}"),
    }
}

fn random_problem(rng: &mut ChaCha8Rng) -> OptProblem {
    let m = MessageCount::exact(1 << rng.random_range(1..=6)).unwrap();
    let p = [0.05, 0.11, 0.2][rng.random_range(0..3)];
    let eps = LogProb::from_prob([1e-2, 1e-3][rng.random_range(0..2)]).unwrap();
    // C(40, 3) = 9880 strictly increasing triples at most
    let h = rng.random_range(20..=40u32);
    OptProblem {
        m,
        p,
        eps_target: eps,
        l: 3,
        search_box: vec![(1, h - 2), (2, h - 1), (3, h)],
        budget: 10_000,
    }
}

fn optimizer_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hits = 0;
    let mut done = 0;
    let mut worst: f64 = 0.0;
    while done < OPT_PROBLEMS {
        let problem = random_problem(&mut rng);
        let exhaustive = optimize_exhaustive(&problem).unwrap();
        let Some(best) = exhaustive.best else { continue };
        let mut small = problem.clone();
        small.budget = OPT_STOCHASTIC_BUDGET;
        let stochastic = optimize_stochastic(&small, OPT_RESTARTS, done as u64).unwrap();
        if let Some(s) = stochastic.best {
            let gap = s.bound.n_bound / best.bound.n_bound - 1.0;
            worst = worst.max(gap);
            if gap <= OPT_REL_GAP {
                hits += 1;
            }
        } else {
            worst = f64::INFINITY;
        }
        done += 1;
    }
    Verdict {
        pass: hits >= OPT_REQUIRED,
        detail: format!(
            "{hits}/{OPT_PROBLEMS} within {OPT_REL_GAP} (need {OPT_REQUIRED}); stochastic budget {OPT_STOCHASTIC_BUDGET}; worst gap {worst:.4}"
        ),
    }
}

fn rate_curve() -> Verdict {
    let list: Vec<f64> = (4..=16).step_by(2).map(f64::from).collect();
    let eps = LogProb::from_prob(1e-3).unwrap();
    let curve = sweep_rate_curve(0.11, eps, 3, &list, &SweepTemplate::default()).unwrap();
    let feasible = curve.iter().all(|c| c.point.is_some());
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter_map(|c| Some((c.point.as_ref()?.bound.n_bound, c.rate?)))
        .collect();
    let monotone = pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
    let in_range = pts.iter().all(|&(_, r)| r > 0.0 && r < CAPACITY_BITS);
    let shown: Vec<String> = pts.iter().map(|(n, r)| format!("N={n:.2}:R={r:.4}")).collect();
    Verdict {
        pass: feasible && monotone && in_range && pts.len() == list.len(),
        detail: format!(
            "all feasible: {}, nondecreasing: {}, 0 < R < {CAPACITY_BITS}: {}; {}",
            ok(feasible),
            ok(monotone),
            ok(in_range),
            shown.join(" ")
        ),
    }
}

fn long_schedule_gaps() -> Verdict {
    let eps = LogProb::from_prob(1e-10).unwrap();
    let curve = sweep_rate_curve(0.11, eps, 5, &[8.0, 32.0], &SweepTemplate::default()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for c in &curve {
        match &c.point {
            Some(pt) => {
                let n = pt.schedule.times();
                let last = n[4] - n[3];
                let holds = last >= n[1] - n[0] && last >= n[3] - n[2];
                pass &= holds;
                parts.push(format!("log2M={}: {n:?} g={:?}: {}", c.log2m, pt.gammas, ok(holds)));
            }
            None => {
                pass = false;
                parts.push(format!("log2M={}: infeasible", c.log2m));
            }
        }
    }
    Verdict {
        pass,
        detail: parts.join("; "),
    }
}

fn numeric_robustness() -> Verdict {
    let mut evaluated = 0;
    let mut bad = Vec::new();
    for p in [1e-6, 0.11, 0.5] {
        for log2m in [0.0, 1.0, 10.0, 100.0, 250.0, 500.0] {
            let m = MessageCount::from_log2(log2m).unwrap();
            for n in [1u32, 2, 10, 100, 500, 1000] {
                let r = rcu_bsc(n, m, p).unwrap().value.ln();
                let sane = |x: f64| !x.is_nan() && (x.is_finite() || (log2m == 0.0 && x == f64::NEG_INFINITY));
                if !sane(r) {
                    bad.push(format!("rcu n={n} log2M={log2m} p={p}: {r}"));
                }
                if n >= 5 {
                    let times = vec![n / 5, 2 * n / 5, 3 * n / 5, 4 * n / 5, n];
                    let schedule = FeedbackSchedule::new(times).unwrap();
                    let gammas: Vec<u32> = schedule.confirmation_lengths().iter().map(|t| t / 2).collect();
                    let b = evaluate_theorem1(&schedule, m, p, &gammas, &[0.0, 0.0]).unwrap();
                    if !sane(b.eps_bound.ln()) || !b.n_bound.is_finite() {
                        bad.push(format!("bound n={n} log2M={log2m} p={p}: {} {}", b.eps_bound.ln(), b.n_bound));
                    }
                }
                evaluated += 1;
            }
        }
    }
    Verdict {
        pass: bad.is_empty(),
        detail: format!("{evaluated} points; {}", if bad.is_empty() { "all finite".into() } else { bad.join("; ") }),
    }
}

fn main() -> ExitCode {
    let hard: [(&str, Check); 7] = [
        ("1", rcu_exactness),
        ("2", np_optimality),
        ("3", theorem_anchor),
        ("4", simulation_validity),
        ("5", optimizer_correctness),
        ("6", rate_curve),
        ("8", numeric_robustness),
    ];
    let mut all = true;
    for (id, f) in hard {
        let start = Instant::now();
        all &= report(id, true, start, &f());
        if id == "6" {
            let start = Instant::now();
            report("7 (report-only)", false, start, &long_schedule_gaps());
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
