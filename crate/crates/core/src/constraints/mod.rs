//! Feasibility checks for complete schedules and the initial-solution generator.

mod init;
pub mod uptime;

use std::fmt;

use serde::Serialize;

use crate::dispatch::{evaluate, DispatchResult};
use crate::model::{Instance, Mode};
use crate::solution::Solution;

pub use init::{initial_ev, initial_solution, initial_uc, initial_uc_with, repair_pass, InitError, InitOptions};
pub use uptime::{run_violations, satisfies_min_up_down, RunViolation};

/// The individual constraints a schedule must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    GenerationLimits,
    MustRunOff,
    PowerBalance,
    SpinningReserve,
    MinUpDown,
    RampRate,
    BatteryCapacity,
    BatteryDepletion,
    ChargeFrequency,
    BatteryBalance,
    ChargeOnly,
    Dimensions,
}

impl ConstraintKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::GenerationLimits => "generation limits",
            Self::MustRunOff => "must-run/must-off",
            Self::PowerBalance => "power balance",
            Self::SpinningReserve => "spinning reserve",
            Self::MinUpDown => "minimum up/down time",
            Self::RampRate => "ramp rate",
            Self::BatteryCapacity => "fleet battery capacity",
            Self::BatteryDepletion => "fleet battery depletion",
            Self::ChargeFrequency => "charging frequency",
            Self::BatteryBalance => "fleet energy balance",
            Self::ChargeOnly => "charge-only fleet",
            Self::Dimensions => "schedule dimensions",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subject {
    Unit(usize),
    Fleet,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ConstraintKind,
    pub interval: Option<usize>,
    pub subject: Subject,
    /// Size of the breach in the constraint's own unit (MW, MWh or hours).
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(t) = self.interval {
            write!(f, " at hour {}", t + 1)?;
        }
        match self.subject {
            Subject::Unit(i) => write!(f, ", unit {}", i + 1)?,
            Subject::Fleet => write!(f, ", EV fleet")?,
            Subject::System => {}
        }
        write!(f, ": off by {:.6}", self.magnitude)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn of_kind(&self, kind: ConstraintKind) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.kind == kind)
    }

    pub fn has(&self, kind: ConstraintKind) -> bool {
        self.of_kind(kind).next().is_some()
    }

    fn push(&mut self, kind: ConstraintKind, interval: Option<usize>, subject: Subject, magnitude: f64) {
        self.violations.push(Violation {
            kind,
            interval,
            subject,
            magnitude,
        });
    }
}

/// Slack allowed before a constraint counts as violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Generation vs. net demand (MW).
    pub balance_mw: f64,
    /// Fleet energy bookkeeping (MWh).
    pub energy_mwh: f64,
    /// Spinning reserve margin (MW).
    pub reserve_mw: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            balance_mw: 1e-3,
            energy_mwh: 1e-3,
            reserve_mw: 1e-6,
        }
    }
}

impl Tolerances {
    /// Tolerances for schedules whose EV powers were rounded to multiples of
    /// `quantum` MW (e.g. transcribed from a table with two decimals).
    ///
    /// Each entry may be off by half a quantum, which shifts an interval's
    /// reserve margin by up to `(1 + reserve_fraction)` times that and
    /// accumulates over the horizon in energy sums.
    pub fn for_rounded_schedule(instance: &Instance, quantum: f64) -> Self {
        let half = 0.5 * quantum;
        let defaults = Self::default();
        Self {
            balance_mw: defaults.balance_mw,
            energy_mwh: defaults.energy_mwh + half * instance.intervals() as f64 * instance.interval_hours(),
            reserve_mw: defaults.reserve_mw + half * (1.0 + instance.reserve_fraction()),
        }
    }
}

/// Aggregate fleet energy over the horizon; `soc[t]` is the level at the
/// start of interval `t`, `soc[T]` the level at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct SocTrajectory {
    pub soc: Vec<f64>,
}

impl SocTrajectory {
    pub fn new(instance: &Instance, ev_power: &[f64]) -> Self {
        let dt = instance.interval_hours();
        let drive = instance.consumption_per_interval_mwh();
        let mut soc = Vec::with_capacity(ev_power.len() + 1);
        let mut level = instance.initial_soc_mwh();
        soc.push(level);
        for p in ev_power {
            level += -p * dt - drive;
            soc.push(level);
        }
        Self { soc }
    }

    pub fn initial(&self) -> f64 {
        self.soc[0]
    }

    pub fn min(&self) -> f64 {
        self.soc.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.soc.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Whether fleet energy stays within `[0, capacity]` throughout the horizon.
pub fn soc_within_limits(instance: &Instance, ev_power: &[f64], tolerance: f64) -> bool {
    let dt = instance.interval_hours();
    let drive = instance.consumption_per_interval_mwh();
    let cap = instance.fleet_capacity_mwh();
    let mut level = instance.initial_soc_mwh();
    ev_power.iter().all(|p| {
        level += -p * dt - drive;
        level >= -tolerance && level <= cap + tolerance
    })
}

/// Energy drawn from the grid by the fleet over the horizon (MWh, non-negative).
pub fn charged_energy(instance: &Instance, ev_power: &[f64]) -> f64 {
    ev_power.iter().filter(|p| **p < 0.0).map(|p| -p).sum::<f64>() * instance.interval_hours()
}

/// Net fleet energy exchange plus driving consumption; zero when balanced.
pub fn battery_balance_residual(instance: &Instance, ev_power: &[f64]) -> f64 {
    ev_power.iter().sum::<f64>() * instance.interval_hours() + instance.fleet_consumption_mwh()
}

pub fn check_all(instance: &Instance, solution: &Solution) -> ConstraintReport {
    check_all_with(instance, solution, &Tolerances::default())
}

pub fn check_all_with(instance: &Instance, solution: &Solution, tol: &Tolerances) -> ConstraintReport {
    let mut report = ConstraintReport::default();
    let dispatch = match evaluate(instance, solution) {
        Ok(d) => d,
        Err(_) => {
            report.push(ConstraintKind::Dimensions, None, Subject::System, 1.0);
            return report;
        }
    };
    check_thermal(instance, solution, &dispatch, tol, &mut report);
    check_fleet(instance, solution, tol, &mut report);
    report
}

fn check_thermal(
    instance: &Instance,
    solution: &Solution,
    dispatch: &DispatchResult,
    tol: &Tolerances,
    report: &mut ConstraintReport,
) {
    let units = instance.units();
    let commitment = &solution.commitment;
    for t in 0..instance.intervals() {
        let row = &dispatch.power[t];
        for (i, unit) in units.iter().enumerate() {
            let p = row[i];
            let breach = if commitment.is_on(t, i) {
                (unit.p_min - p).max(p - unit.p_max)
            } else {
                p.abs()
            };
            if breach > tol.balance_mw {
                report.push(ConstraintKind::GenerationLimits, Some(t), Subject::Unit(i), breach);
            }
        }

        let generated: f64 = row.iter().sum();
        let imbalance = (generated + solution.ev_power[t] - instance.demand()[t]).abs();
        if imbalance > tol.balance_mw {
            report.push(ConstraintKind::PowerBalance, Some(t), Subject::System, imbalance);
        }

        let slack = solution.reserve_slack(instance, t);
        if slack < -tol.reserve_mw {
            report.push(ConstraintKind::SpinningReserve, Some(t), Subject::System, -slack);
        }
    }

    for (i, unit) in units.iter().enumerate() {
        for &t in &unit.must_run {
            if !commitment.is_on(t, i) {
                report.push(ConstraintKind::MustRunOff, Some(t), Subject::Unit(i), 1.0);
            }
        }
        for &t in &unit.must_off {
            if commitment.is_on(t, i) {
                report.push(ConstraintKind::MustRunOff, Some(t), Subject::Unit(i), 1.0);
            }
        }

        let states: Vec<bool> = commitment.unit_states(i).collect();
        for v in run_violations(unit, &states) {
            report.push(
                ConstraintKind::MinUpDown,
                Some(v.interval()),
                Subject::Unit(i),
                f64::from(v.shortfall()),
            );
        }

        for t in 1..instance.intervals() {
            if !(states[t] && states[t - 1]) {
                continue;
            }
            let step = dispatch.power[t][i] - dispatch.power[t - 1][i];
            if let Some(up) = unit.up_ramp {
                if step > up + tol.balance_mw {
                    report.push(ConstraintKind::RampRate, Some(t), Subject::Unit(i), step - up);
                }
            }
            if let Some(down) = unit.down_ramp {
                if -step > down + tol.balance_mw {
                    report.push(ConstraintKind::RampRate, Some(t), Subject::Unit(i), -step - down);
                }
            }
        }
    }
}

fn check_fleet(instance: &Instance, solution: &Solution, tol: &Tolerances, report: &mut ConstraintReport) {
    let ev = &solution.ev_power;
    let trajectory = SocTrajectory::new(instance, ev);
    let cap = instance.fleet_capacity_mwh();
    for (t, &level) in trajectory.soc.iter().enumerate().skip(1) {
        if level > cap + tol.energy_mwh {
            report.push(
                ConstraintKind::BatteryCapacity,
                Some(t - 1),
                Subject::Fleet,
                level - cap,
            );
        }
        if level < -tol.energy_mwh {
            report.push(ConstraintKind::BatteryDepletion, Some(t - 1), Subject::Fleet, -level);
        }
    }

    let charged = charged_energy(instance, ev);
    let limit = instance.charge_limit_mwh();
    if charged > limit + tol.energy_mwh {
        report.push(ConstraintKind::ChargeFrequency, None, Subject::Fleet, charged - limit);
    }

    let residual = battery_balance_residual(instance, ev);
    if residual.abs() > tol.energy_mwh {
        report.push(ConstraintKind::BatteryBalance, None, Subject::Fleet, residual.abs());
    }

    if instance.mode() == Mode::LoadLeveling {
        for (t, &p) in ev.iter().enumerate() {
            if p > 1e-9 {
                report.push(ConstraintKind::ChargeOnly, Some(t), Subject::Fleet, p);
            }
        }
    }
}
