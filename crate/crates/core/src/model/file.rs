//! TOML instance files.
//!
//! ```toml
//! mode = "v2g"                 # or "load-leveling"
//! reserve_fraction = 0.1
//! interval_hours = 1.0         # optional, default 1
//! initial_soc_mwh = 411.0      # optional, default = fleet consumption
//! demand = [700.0, 750.0, ...] # MW per interval, EV load excluded
//!
//! [fleet]
//! count = 50000
//! avg_capacity_kwh = 15.0
//! charge_frequency = 1.0
//! avg_consumption_kwh = 8.22
//!
//! [[units]]
//! p_max = 455.0
//! p_min = 150.0
//! a = 1000.0
//! b = 16.19
//! c = 0.00048
//! start_cost_hot = 4500.0
//! start_cost_cold = 9000.0
//! cold_start_hours = 5
//! min_up = 8
//! min_down = 8
//! initial_state = 8
//! # optional: shutdown_cost, up_ramp, down_ramp,
//! # must_run = [..], must_off = [..] (0-based interval indices)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvFleet, Instance, Mode, ModelError, ThermalUnit};

fn default_interval_hours() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    #[serde(default)]
    mode: Mode,
    reserve_fraction: f64,
    #[serde(default = "default_interval_hours")]
    interval_hours: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_soc_mwh: Option<f64>,
    demand: Vec<f64>,
    fleet: EvFleet,
    units: Vec<ThermalUnit>,
}

pub fn parse_instance(text: &str) -> Result<Instance, ModelError> {
    let file: InstanceFile = toml::from_str(text)?;
    let instance = Instance::new(
        file.units,
        file.fleet,
        file.demand,
        file.reserve_fraction,
        file.interval_hours,
        file.mode,
    )?;
    match file.initial_soc_mwh {
        Some(soc) => instance.with_initial_soc(soc),
        None => Ok(instance),
    }
}

pub fn write_instance(instance: &Instance) -> Result<String, ModelError> {
    let file = InstanceFile {
        mode: instance.mode(),
        reserve_fraction: instance.reserve_fraction(),
        interval_hours: instance.interval_hours(),
        initial_soc_mwh: instance.explicit_initial_soc_mwh(),
        demand: instance.demand().to_vec(),
        fleet: instance.fleet().clone(),
        units: instance.units().to_vec(),
    };
    Ok(toml::to_string(&file)?)
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, ModelError> {
    parse_instance(&fs::read_to_string(path)?)
}

pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, write_instance(instance)?)?;
    Ok(())
}
