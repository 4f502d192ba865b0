//! Lambda-iteration economic dispatch and evaluation of the schedule cost.
//!
//! The cost of a schedule splits into per-interval terms (fuel plus any
//! infeasibility penalty) and per-unit terms (start-up and shut-down costs).
//! [`CostLedger`] keeps both so that a local change only re-dispatches the
//! touched intervals; [`evaluate`] builds a fresh ledger, so the two routes
//! produce bit-identical totals.

use thiserror::Error;

use crate::model::{Instance, ThermalUnit};
use crate::solution::Solution;

/// Stop bisecting once generation matches net demand this closely (MW).
pub const BALANCE_TOLERANCE_MW: f64 = 1e-4;
pub const MAX_LAMBDA_ITERATIONS: usize = 200;
/// Cost added per MW of net demand that committed units cannot follow.
pub const INFEASIBILITY_PENALTY: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispatchError {
    #[error("no units committed")]
    NothingCommitted,
    #[error("net demand {net_demand:.3} MW is outside committed range [{min:.3}, {max:.3}] MW")]
    Infeasible { net_demand: f64, min: f64, max: f64 },
    #[error("solution is {got_intervals}x{got_units}, instance is {intervals}x{units}")]
    DimensionMismatch {
        intervals: usize,
        units: usize,
        got_intervals: usize,
        got_units: usize,
    },
}

/// Fuel cost rate of `unit` at output `p` ($/h).
pub fn fuel_cost(unit: &ThermalUnit, p: f64) -> f64 {
    debug_assert!(
        p >= unit.p_min - 1e-6 && p <= unit.p_max + 1e-6,
        "output {p} outside [{}, {}]",
        unit.p_min,
        unit.p_max
    );
    unit.fuel_cost(p)
}

#[inline]
fn output_at(unit: &ThermalUnit, lambda: f64) -> f64 {
    let p = if unit.c > 0.0 {
        (lambda - unit.b) / (2.0 * unit.c)
    } else if lambda < unit.b {
        unit.p_min
    } else {
        unit.p_max
    };
    p.clamp(unit.p_min, unit.p_max)
}

fn total_output(units: &[ThermalUnit], row: &[bool], lambda: f64) -> f64 {
    units
        .iter()
        .zip(row)
        .filter(|(_, on)| **on)
        .map(|(u, _)| output_at(u, lambda))
        .sum()
}

/// Outcome of dispatching one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalDispatch {
    /// Fuel cost rate of the committed units ($/h).
    pub fuel: f64,
    /// MW of net demand outside the committed output range; 0 when feasible.
    pub violation: f64,
}

/// Dispatch `net_demand` over the units flagged in `row`, writing each unit's
/// output into `out` (0 for offline units).
///
/// When the demand is outside the committed range, every online unit is
/// pinned to the nearer bound and the gap is reported as `violation`.
pub fn dispatch_row(units: &[ThermalUnit], row: &[bool], net_demand: f64, out: &mut [f64]) -> IntervalDispatch {
    debug_assert_eq!(units.len(), row.len());
    debug_assert_eq!(units.len(), out.len());
    out.iter_mut().for_each(|p| *p = 0.0);

    let mut min_total = 0.0;
    let mut max_total = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut any = false;
    for (u, _) in units.iter().zip(row).filter(|(_, on)| **on) {
        any = true;
        min_total += u.p_min;
        max_total += u.p_max;
        lo = lo.min(u.incremental_cost(u.p_min));
        hi = hi.max(u.incremental_cost(u.p_max));
    }
    if !any {
        return IntervalDispatch {
            fuel: 0.0,
            violation: net_demand.abs(),
        };
    }

    let pinned = |out: &mut [f64], at_max: bool| {
        let mut fuel = 0.0;
        for ((u, on), p) in units.iter().zip(row).zip(out.iter_mut()) {
            if *on {
                *p = if at_max { u.p_max } else { u.p_min };
                fuel += u.fuel_cost(*p);
            }
        }
        fuel
    };
    if net_demand <= min_total {
        let fuel = pinned(out, false);
        return IntervalDispatch {
            fuel,
            violation: min_total - net_demand,
        };
    }
    if net_demand >= max_total {
        let fuel = pinned(out, true);
        return IntervalDispatch {
            fuel,
            violation: net_demand - max_total,
        };
    }

    // Widen the bracket so a unit with linear cost (a step at lambda = b)
    // sits strictly inside it.
    lo -= 1.0;
    hi += 1.0;
    // Invariant: total_output(lo) <= net_demand <= total_output(hi).
    for _ in 0..MAX_LAMBDA_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let residual = total_output(units, row, mid) - net_demand;
        if residual < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if residual.abs() <= BALANCE_TOLERANCE_MW {
            break;
        }
    }

    // Blend the two bracket ends so generation matches demand exactly.
    let low_total = total_output(units, row, lo);
    let high_total = total_output(units, row, hi);
    let theta = if high_total > low_total {
        ((net_demand - low_total) / (high_total - low_total)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let mut fuel = 0.0;
    for ((u, on), p) in units.iter().zip(row).zip(out.iter_mut()) {
        if *on {
            let p_lo = output_at(u, lo);
            let p_hi = output_at(u, hi);
            *p = (p_lo + theta * (p_hi - p_lo)).clamp(u.p_min, u.p_max);
            fuel += u.fuel_cost(*p);
        }
    }
    IntervalDispatch { fuel, violation: 0.0 }
}

/// Optimal outputs of the `committed` units (in the given order) for `net_demand`.
pub fn economic_dispatch(
    units: &[ThermalUnit],
    committed: &[usize],
    net_demand: f64,
) -> Result<Vec<f64>, DispatchError> {
    if committed.is_empty() {
        return Err(DispatchError::NothingCommitted);
    }
    let mut row = vec![false; units.len()];
    for &i in committed {
        row[i] = true;
    }
    let mut out = vec![0.0; units.len()];
    let result = dispatch_row(units, &row, net_demand, &mut out);
    if result.violation > 0.0 {
        let (min, max) = committed
            .iter()
            .fold((0.0, 0.0), |(lo, hi), &i| (lo + units[i].p_min, hi + units[i].p_max));
        return Err(DispatchError::Infeasible { net_demand, min, max });
    }
    Ok(committed.iter().map(|&i| out[i]).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct IntervalCost {
    fuel: f64,
    violation: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct TransitionCost {
    startup: f64,
    shutdown: f64,
}

fn transition_cost(unit: &ThermalUnit, states: impl Iterator<Item = bool>) -> TransitionCost {
    let mut cost = TransitionCost::default();
    // Signed run length: hours online (> 0) or offline (< 0).
    let mut run = i64::from(unit.initial_state);
    for on in states {
        if on {
            if run < 0 {
                cost.startup += unit.startup_cost((-run) as u32);
                run = 1;
            } else {
                run += 1;
            }
        } else if run > 0 {
            cost.shutdown += unit.shutdown_cost;
            run = -1;
        } else {
            run -= 1;
        }
    }
    cost
}

/// Cached cost terms of one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct CostLedger {
    intervals: Vec<IntervalCost>,
    units: Vec<TransitionCost>,
    scratch: Vec<f64>,
}

impl CostLedger {
    pub fn new(instance: &Instance, solution: &Solution) -> Self {
        let mut ledger = Self {
            intervals: vec![IntervalCost::default(); instance.intervals()],
            units: vec![TransitionCost::default(); instance.unit_count()],
            scratch: vec![0.0; instance.unit_count()],
        };
        for t in 0..instance.intervals() {
            ledger.refresh_interval(instance, solution, t);
        }
        for i in 0..instance.unit_count() {
            ledger.refresh_unit(instance, solution, i);
        }
        ledger
    }

    /// Re-dispatch interval `t` after its commitment row or EV power changed.
    pub fn refresh_interval(&mut self, instance: &Instance, solution: &Solution, t: usize) {
        let d = dispatch_row(
            instance.units(),
            solution.commitment.row(t),
            solution.net_demand(instance, t),
            &mut self.scratch,
        );
        self.intervals[t] = IntervalCost {
            fuel: d.fuel,
            violation: d.violation,
        };
    }

    /// Recompute start-up and shut-down charges of unit `i`.
    pub fn refresh_unit(&mut self, instance: &Instance, solution: &Solution, i: usize) {
        self.units[i] = transition_cost(&instance.units()[i], solution.commitment.unit_states(i));
    }

    pub fn fuel_cost(&self, instance: &Instance) -> f64 {
        self.intervals.iter().map(|c| c.fuel).sum::<f64>() * instance.interval_hours()
    }

    pub fn startup_cost(&self) -> f64 {
        self.units.iter().map(|c| c.startup).sum()
    }

    pub fn shutdown_cost(&self) -> f64 {
        self.units.iter().map(|c| c.shutdown).sum()
    }

    pub fn penalty(&self) -> f64 {
        self.intervals.iter().map(|c| c.violation).sum::<f64>() * INFEASIBILITY_PENALTY
    }

    pub fn is_dispatchable(&self) -> bool {
        self.intervals.iter().all(|c| c.violation == 0.0)
    }

    pub fn total(&self, instance: &Instance) -> f64 {
        self.fuel_cost(instance) + self.startup_cost() + self.shutdown_cost() + self.penalty()
    }
}

/// Full cost evaluation of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    /// Output of every unit, one row per interval; 0 for offline units.
    pub power: Vec<Vec<f64>>,
    /// MW each interval's net demand lies outside the committed range.
    pub violation: Vec<f64>,
    pub fuel_cost: f64,
    pub startup_cost: f64,
    pub shutdown_cost: f64,
    pub penalty: f64,
    pub total_cost: f64,
    pub feasible: bool,
}

pub fn evaluate(instance: &Instance, solution: &Solution) -> Result<DispatchResult, DispatchError> {
    if !solution.matches(instance) {
        return Err(DispatchError::DimensionMismatch {
            intervals: instance.intervals(),
            units: instance.unit_count(),
            got_intervals: solution.commitment.intervals(),
            got_units: solution.commitment.units(),
        });
    }
    let ledger = CostLedger::new(instance, solution);
    let mut power = Vec::with_capacity(instance.intervals());
    let mut violation = Vec::with_capacity(instance.intervals());
    for t in 0..instance.intervals() {
        let mut row = vec![0.0; instance.unit_count()];
        let d = dispatch_row(
            instance.units(),
            solution.commitment.row(t),
            solution.net_demand(instance, t),
            &mut row,
        );
        power.push(row);
        violation.push(d.violation);
    }
    Ok(DispatchResult {
        power,
        violation,
        fuel_cost: ledger.fuel_cost(instance),
        startup_cost: ledger.startup_cost(),
        shutdown_cost: ledger.shutdown_cost(),
        penalty: ledger.penalty(),
        total_cost: ledger.total(instance),
        feasible: ledger.is_dispatchable(),
    })
}
