use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use vlbf_core::bound::{evaluate_theorem1, evaluate_with_type_one_targets, FeedbackSchedule};
use vlbf_core::channel::{Bsc, Dmc, LogProb};
use vlbf_core::hyptest::{np_beta_for_epsilon, np_errors_from_params, TestErrors, TestParams};
use vlbf_core::opt::{
    optimize_exhaustive, optimize_stochastic_with, sweep_rate_curve, OptProblem, SearchBox,
    StochasticOptions, SweepTemplate, DEFAULT_BOX_FACTOR, DEFAULT_BUDGET, DEFAULT_MIN_BOX,
};
use vlbf_core::rcu::{rcu_bsc, MessageCount};
use vlbf_core::sim::{check_against_bound, simulate as run_simulation, write_trace, ChannelModel, SimConfig};

use crate::config::{need, resolve};
use crate::output::{emit, io_err, sig12, to_json};
use crate::CliError;

/// Exact `M = 2^log2m` when that fits in 64 bits.
fn message_count(log2m: f64) -> Result<MessageCount, CliError> {
    if log2m.fract() == 0.0 && (0.0..=63.0).contains(&log2m) {
        Ok(MessageCount::exact(1u64 << log2m as u32)?)
    } else {
        Ok(MessageCount::from_log2(log2m)?)
    }
}

fn log10_eps(v: f64) -> Result<LogProb, CliError> {
    if !(v < 0.0) {
        return Err(CliError::Domain(format!("log10 epsilon {v} must be negative")));
    }
    Ok(LogProb::from_log10(v)?)
}

fn optional_log10(p: LogProb) -> Option<f64> {
    (!p.is_zero()).then(|| p.log10())
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RcuArgs {
    /// Blocklength.
    #[arg(long)]
    pub n: Option<u32>,
    /// log2 of the number of messages.
    #[arg(long)]
    pub log2m: Option<f64>,
    /// Crossover probability.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn rcu(flags: RcuArgs) -> Result<(), CliError> {
    let a = resolve(&flags, flags.config.as_deref())?;
    let (n, log2m, p) = (need(&a.n, "n")?, need(&a.log2m, "log2m")?, need(&a.p, "p")?);
    let v = rcu_bsc(n, message_count(log2m)?, p)?;
    let value = v.value.prob();
    let out = json!({
        "n": n,
        "log2m": log2m,
        "p": p,
        "value": (value >= 1e-300 || v.value.is_zero()).then_some(value),
        "log10": optional_log10(v.value),
    });
    emit(&to_json(&out)?, None, "rcu", &a, None)
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct NpArgs {
    /// Confirmation length.
    #[arg(long)]
    pub t_prime: Option<u32>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Target type-I error as log10; solves for the optimal test.
    #[arg(long, allow_hyphen_values = true)]
    pub log10_eps: Option<f64>,
    /// Threshold, used when no target is given.
    #[arg(long)]
    pub gamma: Option<u32>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn errors_json(params: TestParams, e: &TestErrors) -> serde_json::Value {
    json!({
        "t_prime": params.t_prime,
        "gamma": params.gamma,
        "lambda": params.lambda,
        "type_one": e.type_one.prob(),
        "type_two": e.type_two.prob(),
        "p_cont": e.p_cont.prob(),
        "type_one_log10": optional_log10(e.type_one),
        "type_two_log10": optional_log10(e.type_two),
    })
}

pub fn np(flags: NpArgs) -> Result<(), CliError> {
    let a = resolve(&flags, flags.config.as_deref())?;
    let (t_prime, p) = (need(&a.t_prime, "t-prime")?, need(&a.p, "p")?);
    let (params, errors) = match (a.log10_eps, a.gamma) {
        (Some(eps), None) => np_beta_for_epsilon(t_prime, p, log10_eps(eps)?)?,
        (None, Some(gamma)) => {
            let params = TestParams::new(t_prime, gamma, a.lambda.unwrap_or(0.0))?;
            (params, np_errors_from_params(params, p)?)
        }
        _ => return Err(CliError::Usage("give exactly one of --log10-eps and --gamma".into())),
    };
    emit(&to_json(&errors_json(params, &errors))?, None, "np", &a, None)
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct BoundArgs {
    /// Feedback times, e.g. 2,4,6.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<u32>>,
    #[arg(long)]
    pub log2m: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// One threshold per confirmation phase.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<u32>>,
    /// Randomization per phase; zeros when omitted.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Type-I error targets as log10, instead of thresholds.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub log10_eps_targets: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn bound(flags: BoundArgs) -> Result<(), CliError> {
    let a = resolve(&flags, flags.config.as_deref())?;
    let schedule = FeedbackSchedule::new(need(&a.schedule, "schedule")?)?;
    let m = message_count(need(&a.log2m, "log2m")?)?;
    let p = need(&a.p, "p")?;
    let result = match (&a.gammas, &a.log10_eps_targets) {
        (Some(g), None) => {
            let lambdas = a.lambdas.clone().unwrap_or_else(|| vec![0.0; g.len()]);
            evaluate_theorem1(&schedule, m, p, g, &lambdas)?
        }
        (None, Some(t)) => {
            let targets = t.iter().map(|&v| log10_eps(v)).collect::<Result<Vec<_>, _>>()?;
            evaluate_with_type_one_targets(&schedule, m, p, &targets)?
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --gammas and --log10-eps-targets".into(),
            ))
        }
    };
    let out = json!({
        "n_bound": result.n_bound,
        "eps_bound": result.eps_bound.prob(),
        "eps_bound_log10": optional_log10(result.eps_bound),
        "rate": result.rate()?,
        "result": result,
    });
    emit(&to_json(&out)?, a.out.as_deref(), "bound", &a, None)
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub log2m: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Target error probability as log10.
    #[arg(long, allow_hyphen_values = true)]
    pub log10_eps: Option<f64>,
    /// Number of feedback times (odd, at least 3).
    #[arg(long)]
    pub l: Option<usize>,
    /// auto, exhaustive or stochastic.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub box_factor: Option<f64>,
    #[arg(long)]
    pub min_box: Option<u32>,
    /// Explicit box as lo:hi per time, e.g. 1:10,2:11,3:12.
    #[arg(long, value_delimiter = ',')]
    pub search_box: Option<Vec<String>>,
    #[arg(long)]
    pub surrogate: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn parse_box(spec: &[String]) -> Result<Vec<(u32, u32)>, CliError> {
    spec.iter()
        .enumerate()
        .map(|(i, r)| {
            let bad = || CliError::Usage(format!("search box entry {} ({r:?}) is not lo:hi", i + 1));
            let (lo, hi) = r.split_once(':').ok_or_else(bad)?;
            Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

pub fn optimize(flags: OptimizeArgs) -> Result<(), CliError> {
    let a = resolve(&flags, flags.config.as_deref())?;
    let m = message_count(need(&a.log2m, "log2m")?)?;
    let p = need(&a.p, "p")?;
    let eps = log10_eps(need(&a.log10_eps, "log10-eps")?)?;
    let l = a.l.unwrap_or(3);
    let mut problem = OptProblem::with_default_box(
        m,
        p,
        eps,
        l,
        a.box_factor.unwrap_or(DEFAULT_BOX_FACTOR),
        a.min_box.unwrap_or(DEFAULT_MIN_BOX),
    )?;
    if let Some(spec) = &a.search_box {
        problem.search_box = parse_box(spec)?;
    }
    problem.budget = a.budget.unwrap_or(DEFAULT_BUDGET);
    problem.validate()?;
    let volume = SearchBox::new(&problem.search_box, l)?.volume();
    let exhaustive = match a.method.as_deref().unwrap_or("auto") {
        "auto" => l == 3 && volume <= u128::from(problem.budget),
        "exhaustive" => true,
        "stochastic" => false,
        other => return Err(CliError::Usage(format!("unknown method {other:?}"))),
    };
    let result = if exhaustive {
        optimize_exhaustive(&problem)?
    } else {
        optimize_stochastic_with(
            &problem,
            &StochasticOptions {
                restarts: a.restarts.unwrap_or(8),
                seed: a.seed.unwrap_or(0),
                surrogate: a.surrogate.unwrap_or(true),
                ..StochasticOptions::default()
            },
        )?
    };
    let feasible = result.is_feasible();
    emit(&to_json(&result)?, a.out.as_deref(), "optimize", &a, a.seed)?;
    if feasible {
        Ok(())
    } else {
        Err(CliError::Infeasible(format!(
            "no schedule in the box meets the target; smallest error bound seen {}",
            result.min_eps
        )))
    }
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub log10_eps: Option<f64>,
    #[arg(long)]
    pub l: Option<usize>,
    /// log2 M values, e.g. 4,6,8.
    #[arg(long, value_delimiter = ',')]
    pub log2m: Option<Vec<f64>>,
    /// Inclusive range start:stop:step.
    #[arg(long)]
    pub log2m_range: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub box_factor: Option<f64>,
    #[arg(long)]
    pub min_box: Option<u32>,
    #[arg(long)]
    pub surrogate: Option<bool>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn parse_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("log2m range {spec:?} is not start:stop:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor();
    if count < 0.0 {
        return Ok(Vec::new());
    }
    Ok((0..=count as u64).map(|i| start + step * i as f64).collect())
}

pub fn sweep(flags: SweepArgs) -> Result<(), CliError> {
    let a = resolve(&flags, flags.config.as_deref())?;
    let p = need(&a.p, "p")?;
    let eps = log10_eps(need(&a.log10_eps, "log10-eps")?)?;
    let l = a.l.unwrap_or(3);
    let list = match (&a.log2m, &a.log2m_range) {
        (Some(v), None) => v.clone(),
        (None, Some(r)) => parse_range(r)?,
        _ => return Err(CliError::Usage("give exactly one of --log2m and --log2m-range".into())),
    };
    let template = SweepTemplate {
        budget: a.budget.unwrap_or(DEFAULT_BUDGET),
        restarts: a.restarts.unwrap_or(8),
        seed: a.seed.unwrap_or(0),
        box_factor: a.box_factor.unwrap_or(DEFAULT_BOX_FACTOR),
        min_box: a.min_box.unwrap_or(DEFAULT_MIN_BOX),
        surrogate: a.surrogate.unwrap_or(true),
    };
    let curve = sweep_rate_curve(p, eps, l, &list, &template)?;

    let k = (l - 1) / 2;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["log2M".to_string(), "N_bound".into(), "eps_bound_log10".into(), "rate".into()];
    header.extend((1..=l).map(|i| format!("n_{i}")));
    header.extend((1..=k).map(|i| format!("gamma_{i}")));
    w.write_record(&header).map_err(|e| CliError::Failed(e.to_string()))?;
    for c in &curve {
        let Some(pt) = &c.point else {
            eprintln!(
                "note: log2M = {} infeasible (smallest error bound {})",
                sig12(c.log2m),
                c.min_eps
            );
            continue;
        };
        let mut row = vec![
            sig12(c.log2m),
            sig12(pt.bound.n_bound),
            sig12(pt.bound.eps_bound.log10()),
            sig12(c.rate.unwrap_or(0.0)),
        ];
        row.extend(pt.schedule.times().iter().map(u32::to_string));
        row.extend(pt.gammas.iter().map(u32::to_string));
        w.write_record(&row).map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::Failed(e.to_string()))?;
    emit(&text, a.out.as_deref(), "sweep", &a, Some(template.seed))
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<u32>>,
    /// Number of messages.
    #[arg(long)]
    pub m: Option<u32>,
    /// BSC crossover probability.
    #[arg(long)]
    pub p: Option<f64>,
    /// DMC description (JSON with inputs, outputs, rows) instead of a BSC.
    #[arg(long)]
    pub channel_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-trial CSV trace destination.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Trials written to the trace.
    #[arg(long)]
    pub trace_limit: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn simulate(flags: SimulateArgs) -> Result<(), CliError> {
    let a = resolve(&flags, flags.config.as_deref())?;
    let schedule = FeedbackSchedule::new(need(&a.schedule, "schedule")?)?;
    let channel = match (&a.channel_file, a.p) {
        (Some(path), None) => ChannelModel::Dmc(Dmc::from_json_file(path)?),
        (None, Some(p)) => ChannelModel::Bsc(Bsc::new(p)?),
        _ => return Err(CliError::Usage("give exactly one of --p and --channel-file".into())),
    };
    let config = SimConfig {
        schedule,
        m: need(&a.m, "m")?,
        channel,
        gammas: need(&a.gammas, "gammas")?,
        lambdas: a.lambdas.clone().unwrap_or_default(),
        trials: need(&a.trials, "trials")?,
        master_seed: a.seed.unwrap_or(0),
    };
    config.validate()?;
    if let Some(path) = &a.trace {
        let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        write_trace(&config, a.trace_limit.unwrap_or(1000), std::io::BufWriter::new(file))?;
    }
    let report = run_simulation(&config)?;
    let check = match &config.channel {
        ChannelModel::Bsc(b) => {
            let lambdas = if config.lambdas.is_empty() {
                vec![0.0; config.gammas.len()]
            } else {
                config.lambdas.clone()
            };
            let bound = evaluate_theorem1(
                &config.schedule,
                MessageCount::exact(u64::from(config.m))?,
                b.p(),
                &config.gammas,
                &lambdas,
            )?;
            Some(check_against_bound(&report, &bound))
        }
        ChannelModel::Dmc(_) => None,
    };
    let out = json!({ "report": report, "bound_check": check });
    emit(&to_json(&out)?, a.out.as_deref(), "simulate", &a, Some(config.master_seed))?;
    match check {
        Some(c) if c.pass => {
            eprintln!("PASS bound check");
            Ok(())
        }
        Some(c) => {
            eprintln!("FAIL bound check");
            Err(CliError::Failed(format!(
                "bound check failed: error {} (limit {}), tau {} (limit {}), support {}",
                report.empirical_error, c.eps_limit, report.empirical_mean_tau, c.tau_limit, c.support_ok
            )))
        }
        None => {
            eprintln!("no analytic bound for a general DMC; bound check skipped");
            Ok(())
        }
    }
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ReportArgs {
    /// Sweep CSV to read.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn schedule_report(flags: ReportArgs) -> Result<(), CliError> {
    let a = resolve(&flags, flags.config.as_deref())?;
    let input = need(&a.input, "input")?;
    let text = report_csv(&input)?;
    emit(&text, a.out.as_deref(), "schedule-report", &a, None)
}

fn report_csv(input: &Path) -> Result<String, CliError> {
    let raw = std::fs::read_to_string(input).map_err(|e| io_err(input, e))?;
    if raw.trim().is_empty() {
        return Ok(String::new());
    }
    let mut r = csv::Reader::from_reader(raw.as_bytes());
    let headers = r.headers().map_err(|e| io_err(input, e))?.clone();
    let n_col = headers
        .iter()
        .position(|h| h == "N_bound")
        .ok_or_else(|| CliError::Usage(format!("{}: no N_bound column", input.display())))?;
    let time_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.strip_prefix("n_").is_some_and(|i| i.parse::<u32>().is_ok()))
        .map(|(c, h)| (c, h.to_string()))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["N_bound".to_string()];
    header.extend(time_cols.iter().map(|(_, h)| format!("{h}/N")));
    w.write_record(&header).map_err(|e| CliError::Failed(e.to_string()))?;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err(input, e))?;
        let num = |c: usize| -> Result<f64, CliError> {
            rec.get(c)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| CliError::Usage(format!("{} row {}: bad number in column {}", input.display(), line + 1, c + 1)))
        };
        let n = num(n_col)?;
        let mut row = vec![sig12(n)];
        for (c, _) in &time_cols {
            row.push(sig12(num(*c)? / n));
        }
        w.write_record(&row).map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Failed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("4:16:2").unwrap(), vec![4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0]);
        assert!(parse_range("5:4:1").unwrap().is_empty());
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("1:2:0").is_err());
    }

    #[test]
    fn boxes() {
        assert_eq!(parse_box(&["1:3".into(), "2:5".into()]).unwrap(), vec![(1, 3), (2, 5)]);
        assert!(parse_box(&["1-3".into()]).is_err());
    }

    #[test]
    fn exact_message_counts() {
        assert_eq!(message_count(4.0).unwrap().exact_value(), Some(16));
        assert_eq!(message_count(100.0).unwrap().exact_value(), None);
        assert!(message_count(-1.0).is_err());
    }
}
