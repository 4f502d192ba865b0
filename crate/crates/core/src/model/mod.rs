//! Problem data for joint EV / unit-commitment scheduling.
//!
//! Powers are in MW and energies in MWh throughout the solver. The fleet is
//! described in kWh per vehicle (the way fleet data is usually published) and
//! converted once when an [`Instance`] is built.

mod builtin;
mod file;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{builtin_instance, SystemSize};
pub use file::{load_instance, parse_instance, save_instance, write_instance};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("failed to parse instance file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize instance: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("instance file I/O: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::Invalid(msg.into())
}

/// Which EV operating model the instance is scheduled under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Bidirectional: the fleet may charge (negative) or discharge (positive).
    #[default]
    V2g,
    /// Charging only: fleet power is never positive.
    LoadLeveling,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::V2g, Mode::LoadLeveling];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::V2g => "v2g",
            Mode::LoadLeveling => "load-leveling",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "v2g" => Ok(Mode::V2g),
            "load-leveling" | "load_leveling" | "loadleveling" => Ok(Mode::LoadLeveling),
            other => Err(format!("unknown mode `{other}` (expected v2g or load-leveling)")),
        }
    }
}

/// One thermal generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalUnit {
    pub p_max: f64,
    pub p_min: f64,
    /// Fuel cost coefficients: `a + b·P + c·P²` in $/h.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub start_cost_hot: f64,
    pub start_cost_cold: f64,
    /// Extra hours beyond the minimum down time before the unit is cold.
    pub cold_start_hours: u32,
    #[serde(default)]
    pub shutdown_cost: f64,
    pub min_up: u32,
    pub min_down: u32,
    /// Hours the unit has already been online (> 0) or offline (< 0) when the
    /// horizon starts.
    pub initial_state: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up_ramp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub down_ramp: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub must_run: BTreeSet<usize>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub must_off: BTreeSet<usize>,
}

impl ThermalUnit {
    /// Fuel cost rate at output `p`, in $/h.
    #[inline]
    pub fn fuel_cost(&self, p: f64) -> f64 {
        self.a + self.b * p + self.c * p * p
    }

    /// Marginal cost dF/dP at output `p`.
    #[inline]
    pub fn incremental_cost(&self, p: f64) -> f64 {
        self.b + 2.0 * self.c * p
    }

    /// Mean cost per MWh when running flat out; used to rank units.
    pub fn full_load_average_cost(&self) -> f64 {
        self.a / self.p_max + self.b + self.c * self.p_max
    }

    /// Temperature-dependent start-up cost after `off_hours` offline.
    ///
    /// Hot while `off_hours <= min_down + cold_start_hours`, cold beyond that.
    /// Callers are expected to have enforced the minimum down time already.
    pub fn startup_cost(&self, off_hours: u32) -> f64 {
        if off_hours > self.min_down + self.cold_start_hours {
            self.start_cost_cold
        } else {
            self.start_cost_hot
        }
    }

    pub fn is_forced(&self, t: usize) -> bool {
        self.must_run.contains(&t) || self.must_off.contains(&t)
    }

    fn validate(&self, index: usize, intervals: usize) -> Result<(), ModelError> {
        let name = format!("unit {}", index + 1);
        let finite = [self.p_max, self.p_min, self.a, self.b, self.c]
            .iter()
            .chain([self.start_cost_hot, self.start_cost_cold, self.shutdown_cost].iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid(format!("{name}: coefficients must be finite")));
        }
        if self.p_min <= 0.0 {
            return Err(invalid(format!("{name}: p_min ({}) must be positive", self.p_min)));
        }
        if self.p_min > self.p_max {
            return Err(invalid(format!(
                "{name}: p_min ({}) must not exceed p_max ({})",
                self.p_min, self.p_max
            )));
        }
        if self.a < 0.0 || self.c < 0.0 {
            return Err(invalid(format!(
                "{name}: cost coefficients a and c must be non-negative"
            )));
        }
        if self.start_cost_hot < 0.0 || self.start_cost_cold < 0.0 || self.shutdown_cost < 0.0 {
            return Err(invalid(format!(
                "{name}: start-up and shut-down costs must be non-negative"
            )));
        }
        if self.min_up == 0 || self.min_down == 0 {
            return Err(invalid(format!("{name}: min_up and min_down must be at least 1")));
        }
        if self.initial_state == 0 {
            return Err(invalid(format!("{name}: initial_state must be non-zero")));
        }
        for ramp in [self.up_ramp, self.down_ramp].into_iter().flatten() {
            if !(ramp > 0.0) {
                return Err(invalid(format!("{name}: ramp limits must be positive")));
            }
        }
        if let Some(t) = self.must_run.intersection(&self.must_off).next() {
            return Err(invalid(format!("{name}: interval {t} is both must-run and must-off")));
        }
        if let Some(&t) = self
            .must_run
            .iter()
            .chain(self.must_off.iter())
            .find(|&&t| t >= intervals)
        {
            return Err(invalid(format!("{name}: forced interval {t} is outside the horizon")));
        }
        Ok(())
    }
}

/// Aggregate EV fleet, described per vehicle in kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvFleet {
    pub count: u64,
    pub avg_capacity_kwh: f64,
    pub charge_frequency: f64,
    /// Energy each vehicle drives away with over one scheduling period.
    pub avg_consumption_kwh: f64,
}

impl EvFleet {
    pub fn empty() -> Self {
        Self {
            count: 0,
            avg_capacity_kwh: 1.0,
            charge_frequency: 1.0,
            avg_consumption_kwh: 0.0,
        }
    }

    pub fn total_capacity_mwh(&self) -> f64 {
        self.count as f64 * self.avg_capacity_kwh / 1000.0
    }

    pub fn total_consumption_mwh(&self) -> f64 {
        self.count as f64 * self.avg_consumption_kwh / 1000.0
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.avg_capacity_kwh > 0.0) || !self.avg_capacity_kwh.is_finite() {
            return Err(invalid("fleet: avg_capacity_kwh must be positive"));
        }
        if !(self.charge_frequency >= 0.0) || !self.charge_frequency.is_finite() {
            return Err(invalid("fleet: charge_frequency must be non-negative"));
        }
        if !(self.avg_consumption_kwh >= 0.0) || !self.avg_consumption_kwh.is_finite() {
            return Err(invalid("fleet: avg_consumption_kwh must be non-negative"));
        }
        Ok(())
    }
}

/// A validated, immutable scheduling problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    units: Vec<ThermalUnit>,
    fleet: EvFleet,
    demand: Vec<f64>,
    reserve_fraction: f64,
    interval_hours: f64,
    mode: Mode,
    initial_soc_mwh: Option<f64>,
    // derived
    fleet_capacity_mwh: f64,
    fleet_consumption_mwh: f64,
    free_cells: Vec<(usize, usize)>,
}

impl Instance {
    pub fn new(
        units: Vec<ThermalUnit>,
        fleet: EvFleet,
        demand: Vec<f64>,
        reserve_fraction: f64,
        interval_hours: f64,
        mode: Mode,
    ) -> Result<Self, ModelError> {
        if units.is_empty() {
            return Err(invalid("at least one thermal unit is required"));
        }
        if demand.is_empty() {
            return Err(invalid("demand must cover at least one interval"));
        }
        if let Some((t, d)) = demand.iter().enumerate().find(|(_, d)| !(**d > 0.0) || !d.is_finite()) {
            return Err(invalid(format!("demand[{t}] = {d} must be positive")));
        }
        if !(reserve_fraction >= 0.0) || !reserve_fraction.is_finite() {
            return Err(invalid("reserve_fraction must be non-negative"));
        }
        if !(interval_hours > 0.0) || !interval_hours.is_finite() {
            return Err(invalid("interval_hours must be positive"));
        }
        for (i, unit) in units.iter().enumerate() {
            unit.validate(i, demand.len())?;
        }
        fleet.validate()?;
        let capacity: f64 = units.iter().map(|u| u.p_max).sum();
        let peak = demand.iter().cloned().fold(f64::MIN, f64::max);
        if capacity <= peak {
            return Err(invalid(format!(
                "installed capacity {capacity} MW does not exceed peak demand {peak} MW"
            )));
        }

        let free_cells = (0..demand.len())
            .flat_map(|t| (0..units.len()).map(move |i| (t, i)))
            .filter(|&(t, i)| !units[i].is_forced(t))
            .collect();
        Ok(Self {
            fleet_capacity_mwh: fleet.total_capacity_mwh(),
            fleet_consumption_mwh: fleet.total_consumption_mwh(),
            units,
            fleet,
            demand,
            reserve_fraction,
            interval_hours,
            mode,
            initial_soc_mwh: None,
            free_cells,
        })
    }

    /// Override the fleet's stored energy at the start of the horizon.
    pub fn with_initial_soc(mut self, soc_mwh: f64) -> Result<Self, ModelError> {
        if !(0.0..=self.fleet_capacity_mwh).contains(&soc_mwh) {
            return Err(invalid(format!(
                "initial_soc_mwh {soc_mwh} must lie in [0, {}]",
                self.fleet_capacity_mwh
            )));
        }
        self.initial_soc_mwh = Some(soc_mwh);
        Ok(self)
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// Duplicate the unit list `k` times and scale demand and fleet size by `k`.
    pub fn scaled(&self, k: usize) -> Result<Self, ModelError> {
        if k == 0 {
            return Err(invalid("scale factor must be at least 1"));
        }
        let units = (0..k).flat_map(|_| self.units.iter().cloned()).collect();
        let mut fleet = self.fleet.clone();
        fleet.count *= k as u64;
        let demand = self.demand.iter().map(|d| d * k as f64).collect();
        let scaled = Self::new(
            units,
            fleet,
            demand,
            self.reserve_fraction,
            self.interval_hours,
            self.mode,
        )?;
        match self.initial_soc_mwh {
            Some(soc) => scaled.with_initial_soc(soc * k as f64),
            None => Ok(scaled),
        }
    }

    pub fn units(&self) -> &[ThermalUnit] {
        &self.units
    }

    pub fn fleet(&self) -> &EvFleet {
        &self.fleet
    }

    pub fn demand(&self) -> &[f64] {
        &self.demand
    }

    pub fn reserve_fraction(&self) -> f64 {
        self.reserve_fraction
    }

    pub fn interval_hours(&self) -> f64 {
        self.interval_hours
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn intervals(&self) -> usize {
        self.demand.len()
    }

    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    pub fn fleet_capacity_mwh(&self) -> f64 {
        self.fleet_capacity_mwh
    }

    pub fn fleet_consumption_mwh(&self) -> f64 {
        self.fleet_consumption_mwh
    }

    /// Maximum energy the fleet may draw from the grid over the horizon.
    pub fn charge_limit_mwh(&self) -> f64 {
        self.fleet_capacity_mwh * self.fleet.charge_frequency
    }

    /// Fleet energy at the start of the horizon; defaults to one period of consumption.
    pub fn initial_soc_mwh(&self) -> f64 {
        self.initial_soc_mwh.unwrap_or(self.fleet_consumption_mwh)
    }

    pub fn explicit_initial_soc_mwh(&self) -> Option<f64> {
        self.initial_soc_mwh
    }

    /// Energy the fleet consumes while driving during each interval.
    pub fn consumption_per_interval_mwh(&self) -> f64 {
        self.fleet_consumption_mwh / self.intervals() as f64
    }

    /// Spinning reserve requirement for a given net demand (demand minus EV output).
    #[inline]
    pub fn reserve_requirement(&self, net_demand: f64) -> f64 {
        self.reserve_fraction * net_demand
    }

    /// Commitment cells the solver may change (not must-run or must-off).
    pub fn free_cells(&self) -> &[(usize, usize)] {
        &self.free_cells
    }
}
