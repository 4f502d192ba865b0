//! Experiment orchestration behind the `evuc` binary: repeated seeded runs,
//! model comparison, schedule validation and their text/JSON renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use evuc_core::constraints::{check_all, check_all_with, ConstraintReport, Tolerances};
use evuc_core::cro::{run_rng, solve_with_rng, CroError, CroOutcome};
use evuc_core::model::{load_instance, ModelError};
use evuc_core::schedule::{parse_csv, reserve_percent, ScheduleError};
use evuc_core::{builtin_instance, evaluate, CroParams, DispatchResult, Instance, Mode, Solution, SystemSize};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("run {run}: {source}")]
    Solver { run: u64, source: CroError },
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for anything wrong with the request, 2 when the work itself failed.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Model(_) | CliError::Input { .. } => 1,
            CliError::Solver { .. } | CliError::Output { .. } => 2,
        }
    }
}

/// Built-in system by unit count, or an instance file. `mode` overrides the
/// file's own mode when given.
pub fn resolve_instance(units: Option<usize>, path: Option<&Path>, mode: Option<Mode>) -> Result<Instance, CliError> {
    match (units, path) {
        (Some(n), None) => {
            let size = SystemSize::from_units(n)
                .ok_or_else(|| CliError::Usage(format!("no built-in {n}-unit system (choose 10, 20 or 40)")))?;
            Ok(builtin_instance(size, mode.unwrap_or_default()))
        }
        (None, Some(p)) => {
            let inst = load_instance(p)?;
            Ok(match mode {
                Some(m) => inst.with_mode(m),
                None => inst,
            })
        }
        _ => Err(CliError::Usage("give exactly one of --units or --instance".into())),
    }
}

/// Table IV defaults, then the TOML override file, then an explicit budget.
pub fn resolve_params(path: Option<&Path>, budget: Option<u64>) -> Result<CroParams, CliError> {
    let mut params = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| input_error(p, e))?;
            toml::from_str(&text).map_err(|e| input_error(p, e))?
        }
        None => CroParams::default(),
    };
    if let Some(b) = budget {
        params.eval_budget = b;
    }
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(params)
}

fn input_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub run: u64,
    pub seed: u64,
    pub cost: f64,
    pub evaluations: u64,
    pub wall_time_s: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub best_cost: f64,
    pub mean_cost: f64,
    pub worst_cost: f64,
    pub std_cost: f64,
    pub mean_time_s: f64,
    pub all_feasible: bool,
}

impl Summary {
    fn of(records: &[RunRecord]) -> Self {
        let n = records.len() as f64;
        let costs = records.iter().map(|r| r.cost);
        let mean = costs.clone().sum::<f64>() / n;
        let var = costs.clone().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
        Self {
            runs: records.len(),
            best_cost: costs.clone().fold(f64::INFINITY, f64::min),
            mean_cost: mean,
            worst_cost: costs.fold(f64::NEG_INFINITY, f64::max),
            std_cost: var.sqrt(),
            mean_time_s: records.iter().map(|r| r.wall_time_s).sum::<f64>() / n,
            all_feasible: records.iter().all(|r| r.feasible),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub instance: Instance,
    pub params: CroParams,
    pub runs: u64,
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub mode: Mode,
    pub records: Vec<RunRecord>,
    pub summary: Summary,
    /// Index into `records` of the cheapest run (lowest index on ties).
    pub best_run: usize,
    pub best: CroOutcome,
}

/// Execute `runs` independent solver runs on up to `jobs` threads.
///
/// Run `k` draws from stream `k` of a ChaCha8 generator seeded with the
/// master seed, so every run's result is fixed by `(seed, k)` alone and does
/// not depend on `jobs` or scheduling order.
pub fn run_experiment(exp: &Experiment) -> Result<ExperimentResult, CliError> {
    if exp.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let jobs = exp.jobs.clamp(1, exp.runs as usize);
    let next = AtomicUsize::new(0);
    type Slot = Option<Result<(RunRecord, CroOutcome), CliError>>;
    let slots: Mutex<Vec<Slot>> = Mutex::new((0..exp.runs).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k as u64 >= exp.runs {
                    break;
                }
                let result = single_run(exp, k as u64);
                slots.lock().expect("no worker panicked")[k] = Some(result);
            });
        }
    });

    let mut records = Vec::with_capacity(exp.runs as usize);
    let mut best: Option<(usize, CroOutcome)> = None;
    for (k, slot) in slots.into_inner().expect("no worker panicked").into_iter().enumerate() {
        let (record, outcome) = slot.expect("every run executed")?;
        if best.as_ref().is_none_or(|(_, b)| outcome.best_cost() < b.best_cost()) {
            best = Some((k, outcome));
        }
        records.push(record);
    }
    let (best_run, best) = best.expect("at least one run");
    Ok(ExperimentResult {
        mode: exp.instance.mode(),
        summary: Summary::of(&records),
        records,
        best_run,
        best,
    })
}

fn single_run(exp: &Experiment, run: u64) -> Result<(RunRecord, CroOutcome), CliError> {
    let start = Instant::now();
    let outcome = solve_with_rng(&exp.instance, &exp.params, run_rng(exp.seed, run))
        .map_err(|source| CliError::Solver { run, source })?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let record = RunRecord {
        run,
        seed: exp.seed,
        cost: outcome.best_cost(),
        evaluations: outcome.stats.evaluations,
        wall_time_s,
        feasible: check_all(&exp.instance, &outcome.best).feasible(),
    };
    Ok((record, outcome))
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub v2g: ExperimentResult,
    pub load_leveling: ExperimentResult,
}

impl Comparison {
    /// Best V2G cost minus best load-leveling cost; negative when V2G helps.
    pub fn difference(&self) -> f64 {
        self.v2g.summary.best_cost - self.load_leveling.summary.best_cost
    }
}

/// The same experiment under both fleet models.
pub fn compare(exp: &Experiment) -> Result<Comparison, CliError> {
    let with_mode = |mode| Experiment {
        instance: exp.instance.clone().with_mode(mode),
        ..exp.clone()
    };
    Ok(Comparison {
        v2g: run_experiment(&with_mode(Mode::V2g))?,
        load_leveling: run_experiment(&with_mode(Mode::LoadLeveling))?,
    })
}

#[derive(Debug, Serialize)]
struct ExperimentReport<'a> {
    units: usize,
    mode: Mode,
    master_seed: u64,
    stream_rule: &'static str,
    params: &'a CroParams,
    summary: &'a Summary,
    best_run: u64,
    runs: &'a [RunRecord],
}

const STREAM_RULE: &str = "run k uses ChaCha8 seeded from master_seed, stream k";

/// Aggregate report as pretty JSON.
pub fn experiment_report(exp: &Experiment, result: &ExperimentResult) -> String {
    let report = ExperimentReport {
        units: exp.instance.unit_count(),
        mode: result.mode,
        master_seed: exp.seed,
        stream_rule: STREAM_RULE,
        params: &exp.params,
        summary: &result.summary,
        best_run: result.best_run as u64,
        runs: &result.records,
    };
    serde_json::to_string_pretty(&report).expect("report is serializable")
}

pub fn comparison_report(exp: &Experiment, cmp: &Comparison) -> String {
    #[derive(Serialize)]
    struct Report<'a> {
        units: usize,
        master_seed: u64,
        stream_rule: &'static str,
        params: &'a CroParams,
        v2g: &'a Summary,
        load_leveling: &'a Summary,
        difference: f64,
    }
    serde_json::to_string_pretty(&Report {
        units: exp.instance.unit_count(),
        master_seed: exp.seed,
        stream_rule: STREAM_RULE,
        params: &exp.params,
        v2g: &cmp.v2g.summary,
        load_leveling: &cmp.load_leveling.summary,
        difference: cmp.difference(),
    })
    .expect("report is serializable")
}

/// Human-readable schedule in the layout of the published tables.
pub fn schedule_table(instance: &Instance, solution: &Solution, dispatch: &DispatchResult) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:>4}", "h");
    for i in 1..=instance.unit_count() {
        let _ = write!(out, " {:>8}", format!("u{i}"));
    }
    let _ = writeln!(out, " {:>9} {:>8} {:>8}", "V2G", "Load", "Reserve");
    for t in 0..instance.intervals() {
        let _ = write!(out, "{:>4}", t + 1);
        for p in &dispatch.power[t] {
            let _ = write!(out, " {:>8.2}", p);
        }
        let _ = writeln!(
            out,
            " {:>9.2} {:>8.0} {:>7.2}%",
            solution.ev_power[t],
            instance.demand()[t],
            reserve_percent(instance, solution, t)
        );
    }
    let _ = writeln!(out, "Running cost = ${:.2}", dispatch.total_cost);
    out
}

pub fn summary_line(label: &str, s: &Summary) -> String {
    format!(
        "{label:<14} best {:>14.2}  mean {:>14.2}  worst {:>14.2}  mean time {:>8.3} s",
        s.best_cost, s.mean_cost, s.worst_cost, s.mean_time_s
    )
}

#[derive(Debug)]
pub struct Validation {
    pub solution: Solution,
    pub dispatch: DispatchResult,
    pub report: ConstraintReport,
}

/// Check a schedule file against an instance. `quantum` is the rounding step
/// of the printed MW values (0 for exact comparison).
pub fn validate_schedule(instance: &Instance, path: &Path, quantum: f64) -> Result<Validation, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| input_error(path, e))?;
    let parsed = parse_csv(instance, &text).map_err(|e: ScheduleError| input_error(path, e))?;
    let solution = parsed.solution;
    let dispatch = evaluate(instance, &solution).map_err(|e| input_error(path, e))?;
    let tol = Tolerances::for_rounded_schedule(instance, quantum);
    let report = check_all_with(instance, &solution, &tol);
    Ok(Validation {
        solution,
        dispatch,
        report,
    })
}
