//! Browser bindings. Every operation returns a JSON string the page draws
//! from; the `*_json` functions hold the logic so they run natively too.

use evuc_core::constraints::{check_all_with, SocTrajectory, Tolerances};
use evuc_core::cro::solve;
use evuc_core::schedule::{parse_csv, reserve_percent, to_csv};
use evuc_core::{builtin_instance, evaluate, CroParams, DispatchResult, Instance, Mode, Solution, SystemSize};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest budget the page may request; keeps the tab responsive.
pub const MAX_BUDGET: u64 = 200_000;

#[derive(Serialize)]
struct ScheduleView {
    units: usize,
    mode: Mode,
    cost: f64,
    fuel_cost: f64,
    startup_cost: f64,
    feasible: bool,
    /// `[unit][hour]` output as a fraction of the unit's capacity.
    loading: Vec<Vec<f64>>,
    power: Vec<Vec<f64>>,
    ev: Vec<f64>,
    demand: Vec<f64>,
    soc: Vec<f64>,
    reserve_pct: Vec<f64>,
    csv: String,
}

impl ScheduleView {
    fn new(instance: &Instance, solution: &Solution, dispatch: &DispatchResult, feasible: bool) -> Self {
        let horizon = instance.intervals();
        let loading = instance
            .units()
            .iter()
            .enumerate()
            .map(|(i, u)| (0..horizon).map(|t| dispatch.power[t][i] / u.p_max).collect())
            .collect();
        Self {
            units: instance.unit_count(),
            mode: instance.mode(),
            cost: dispatch.total_cost,
            fuel_cost: dispatch.fuel_cost,
            startup_cost: dispatch.startup_cost,
            feasible,
            loading,
            power: dispatch.power.clone(),
            ev: solution.ev_power.clone(),
            demand: instance.demand().to_vec(),
            soc: SocTrajectory::new(instance, &solution.ev_power).soc,
            reserve_pct: (0..horizon).map(|t| reserve_percent(instance, solution, t)).collect(),
            csv: to_csv(instance, solution, dispatch),
        }
    }
}

#[derive(Serialize)]
struct SolveView {
    schedule: ScheduleView,
    evaluations: u64,
    initial_cost: f64,
    /// `(evaluations, best cost)` samples.
    trace: Vec<(u64, f64)>,
    reactions: Vec<(String, u64, u64)>,
}

fn instance(units: usize, mode: &str) -> Result<Instance, String> {
    let size = SystemSize::from_units(units).ok_or_else(|| format!("no built-in {units}-unit system"))?;
    let mode: Mode = mode.parse()?;
    Ok(builtin_instance(size, mode))
}

fn params(budget: u64) -> Result<CroParams, String> {
    if budget > MAX_BUDGET {
        return Err(format!("budget is limited to {MAX_BUDGET} evaluations in the browser"));
    }
    let params = CroParams {
        eval_budget: budget,
        ..CroParams::default()
    };
    params.validate().map_err(|e| e.to_string())?;
    Ok(params)
}

pub fn solve_json(units: usize, mode: &str, budget: u64, seed: u64) -> Result<String, String> {
    let inst = instance(units, mode)?;
    let out = solve(&inst, &params(budget)?, seed).map_err(|e| e.to_string())?;
    let feasible = evuc_core::constraints::check_all(&inst, &out.best).feasible();
    let stats = &out.stats;
    let view = SolveView {
        schedule: ScheduleView::new(&inst, &out.best, &out.dispatch, feasible),
        evaluations: stats.evaluations,
        initial_cost: stats.initial_best_cost,
        trace: stats.trace.iter().map(|p| (p.evaluations, p.best_cost)).collect(),
        reactions: evuc_core::cro::Reaction::ALL
            .iter()
            .map(|r| (format!("{r:?}"), stats.attempted(*r), stats.accepted(*r)))
            .collect(),
    };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

#[derive(Serialize)]
struct CompareView {
    v2g: ScheduleView,
    load_leveling: ScheduleView,
    difference: f64,
}

pub fn compare_json(units: usize, budget: u64, seed: u64) -> Result<String, String> {
    let params = params(budget)?;
    let run = |mode: &str| -> Result<ScheduleView, String> {
        let inst = instance(units, mode)?;
        let out = solve(&inst, &params, seed).map_err(|e| e.to_string())?;
        let feasible = evuc_core::constraints::check_all(&inst, &out.best).feasible();
        Ok(ScheduleView::new(&inst, &out.best, &out.dispatch, feasible))
    };
    let v2g = run("v2g")?;
    let load_leveling = run("load-leveling")?;
    let view = CompareView {
        difference: v2g.cost - load_leveling.cost,
        v2g,
        load_leveling,
    };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

#[derive(Serialize)]
struct ValidateView {
    schedule: ScheduleView,
    violations: Vec<String>,
}

/// Check a pasted schedule CSV; `quantum` is the rounding of its MW values.
pub fn validate_json(csv: &str, units: usize, mode: &str, quantum: f64) -> Result<String, String> {
    let inst = instance(units, mode)?;
    let parsed = parse_csv(&inst, csv).map_err(|e| e.to_string())?;
    let dispatch = evaluate(&inst, &parsed.solution).map_err(|e| e.to_string())?;
    let report = check_all_with(
        &inst,
        &parsed.solution,
        &Tolerances::for_rounded_schedule(&inst, quantum.max(0.0)),
    );
    let view = ValidateView {
        schedule: ScheduleView::new(&inst, &parsed.solution, &dispatch, report.feasible()),
        violations: report.violations.iter().map(ToString::to_string).collect(),
    };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

#[wasm_bindgen(js_name = solve)]
pub fn solve_js(units: u32, mode: &str, budget: u32, seed: u32) -> Result<String, JsError> {
    solve_json(units as usize, mode, budget.into(), seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = compare)]
pub fn compare_js(units: u32, budget: u32, seed: u32) -> Result<String, JsError> {
    compare_json(units as usize, budget.into(), seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = validate)]
pub fn validate_js(csv: &str, units: u32, mode: &str, quantum: f64) -> Result<String, JsError> {
    validate_json(csv, units as usize, mode, quantum).map_err(|e| JsError::new(&e))
}
