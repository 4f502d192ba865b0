//! The classic 10-unit benchmark system with a 50 000 vehicle fleet, and its
//! 20- and 40-unit duplications.

use std::collections::BTreeSet;

use super::{EvFleet, Instance, Mode, ThermalUnit};

/// Built-in system sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemSize {
    Ten,
    Twenty,
    Forty,
}

impl SystemSize {
    pub const ALL: [SystemSize; 3] = [SystemSize::Ten, SystemSize::Twenty, SystemSize::Forty];

    pub fn from_units(units: usize) -> Option<Self> {
        match units {
            10 => Some(Self::Ten),
            20 => Some(Self::Twenty),
            40 => Some(Self::Forty),
            _ => None,
        }
    }

    pub fn units(self) -> usize {
        10 * self.multiplier()
    }

    pub fn multiplier(self) -> usize {
        match self {
            Self::Ten => 1,
            Self::Twenty => 2,
            Self::Forty => 4,
        }
    }
}

// p_max, p_min, a, b, c
const CAPACITY_AND_COST: [(f64, f64, f64, f64, f64); 10] = [
    (455.0, 150.0, 1000.0, 16.19, 0.00048),
    (455.0, 150.0, 970.0, 17.26, 0.00031),
    (130.0, 20.0, 700.0, 16.6, 0.002),
    (130.0, 20.0, 680.0, 16.5, 0.00211),
    (162.0, 25.0, 450.0, 19.7, 0.00398),
    (80.0, 20.0, 370.0, 22.26, 0.00712),
    (85.0, 25.0, 480.0, 27.74, 0.0079),
    (55.0, 10.0, 660.0, 25.92, 0.00413),
    (55.0, 10.0, 665.0, 27.27, 0.00222),
    (55.0, 10.0, 670.0, 27.79, 0.00173),
];

// min_up, min_down, initial_state, hot cost, cold cost, cold_start_hours
const TIMING: [(u32, u32, i32, f64, f64, u32); 10] = [
    (8, 8, 8, 4500.0, 9000.0, 5),
    (8, 8, 8, 5000.0, 10000.0, 5),
    (5, 5, -5, 550.0, 1100.0, 4),
    (5, 5, -5, 560.0, 1120.0, 4),
    (6, 6, -6, 900.0, 1800.0, 4),
    (3, 3, -3, 170.0, 340.0, 2),
    (3, 3, -3, 260.0, 520.0, 2),
    (1, 1, -1, 30.0, 60.0, 0),
    (1, 1, -1, 30.0, 60.0, 0),
    (1, 1, -1, 30.0, 60.0, 0),
];

const DEMAND: [f64; 24] = [
    700.0, 750.0, 850.0, 950.0, 1000.0, 1100.0, 1150.0, 1200.0, 1300.0, 1400.0, 1450.0, 1500.0, 1400.0, 1300.0, 1200.0,
    1050.0, 1000.0, 1100.0, 1200.0, 1400.0, 1300.0, 1100.0, 900.0, 800.0,
];

pub(crate) fn ten_unit_fleet() -> Vec<ThermalUnit> {
    CAPACITY_AND_COST
        .iter()
        .zip(TIMING.iter())
        .map(
            |(&(p_max, p_min, a, b, c), &(min_up, min_down, initial_state, hot, cold, cold_hours))| ThermalUnit {
                p_max,
                p_min,
                a,
                b,
                c,
                start_cost_hot: hot,
                start_cost_cold: cold,
                cold_start_hours: cold_hours,
                shutdown_cost: 0.0,
                min_up,
                min_down,
                initial_state,
                up_ramp: None,
                down_ramp: None,
                must_run: BTreeSet::new(),
                must_off: BTreeSet::new(),
            },
        )
        .collect()
}

/// One of the built-in benchmark systems.
pub fn builtin_instance(size: SystemSize, mode: Mode) -> Instance {
    let fleet = EvFleet {
        count: 50_000,
        avg_capacity_kwh: 15.0,
        charge_frequency: 1.0,
        avg_consumption_kwh: 8.22,
    };
    let base =
        Instance::new(ten_unit_fleet(), fleet, DEMAND.to_vec(), 0.10, 1.0, mode).expect("built-in tables are valid");
    match size {
        SystemSize::Ten => base,
        other => base.scaled(other.multiplier()).expect("scaling a valid instance"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_unit_tables() {
        let inst = builtin_instance(SystemSize::Ten, Mode::V2g);
        let u = &inst.units()[0];
        assert_eq!(
            (u.p_max, u.p_min, u.a, u.b, u.c),
            (455.0, 150.0, 1000.0, 16.19, 0.00048)
        );
        assert_eq!(inst.intervals(), 24);
        assert_eq!(inst.unit_count(), 10);
        assert_eq!(inst.fleet().count, 50_000);
        assert!((inst.fleet_capacity_mwh() - 750.0).abs() < 1e-9);
        assert!((inst.fleet_consumption_mwh() - 411.0).abs() < 1e-9);
        assert_eq!(inst.reserve_fraction(), 0.10);
        let states: Vec<i32> = inst.units().iter().map(|u| u.initial_state).collect();
        assert_eq!(states, [8, 8, -5, -5, -6, -3, -3, -1, -1, -1]);
        let cold: Vec<u32> = inst.units().iter().map(|u| u.cold_start_hours).collect();
        assert_eq!(cold, [5, 5, 4, 4, 4, 2, 2, 0, 0, 0]);
    }

    #[test]
    fn twenty_unit_first_hour() {
        let inst = builtin_instance(SystemSize::Twenty, Mode::V2g);
        assert_eq!(inst.demand()[0], 1400.0);
        assert_eq!(inst.fleet().count, 100_000);
        assert_eq!(inst.unit_count(), 20);
    }

    #[test]
    fn forty_unit_consumption() {
        let inst = builtin_instance(SystemSize::Forty, Mode::LoadLeveling);
        assert!((inst.fleet_consumption_mwh() - 1644.0).abs() < 1e-9);
        assert_eq!(inst.demand()[0], 2800.0);
        assert_eq!(inst.mode(), Mode::LoadLeveling);
    }

    #[test]
    fn scaling_is_proportional() {
        let base = builtin_instance(SystemSize::Ten, Mode::V2g);
        let sum_pmax = |i: &Instance| i.units().iter().map(|u| u.p_max).sum::<f64>();
        let sum_demand = |i: &Instance| i.demand().iter().sum::<f64>();
        for size in SystemSize::ALL {
            let k = size.multiplier() as f64;
            let inst = builtin_instance(size, Mode::V2g);
            assert_eq!(inst.unit_count(), size.units());
            assert!((sum_pmax(&inst) - k * sum_pmax(&base)).abs() < 1e-9);
            assert!((sum_demand(&inst) - k * sum_demand(&base)).abs() < 1e-9);
            assert!((inst.fleet_capacity_mwh() - k * base.fleet_capacity_mwh()).abs() < 1e-9);
            assert!((inst.fleet_consumption_mwh() - k * base.fleet_consumption_mwh()).abs() < 1e-9);
        }
    }
}
