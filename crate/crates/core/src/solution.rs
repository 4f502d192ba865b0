use serde::{Deserialize, Serialize};

use crate::model::Instance;

/// Interval-by-unit on/off matrix, stored row-major (one row per interval).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Commitment {
    intervals: usize,
    units: usize,
    bits: Vec<bool>,
}

impl Commitment {
    pub fn all_off(intervals: usize, units: usize) -> Self {
        Self {
            intervals,
            units,
            bits: vec![false; intervals * units],
        }
    }

    pub fn all_on(intervals: usize, units: usize) -> Self {
        Self {
            intervals,
            units,
            bits: vec![true; intervals * units],
        }
    }

    /// Build from rows of on/off flags, one row per interval.
    pub fn from_rows<R: AsRef<[bool]>>(rows: &[R]) -> Option<Self> {
        let units = rows.first()?.as_ref().len();
        if units == 0 || rows.iter().any(|r| r.as_ref().len() != units) {
            return None;
        }
        Some(Self {
            intervals: rows.len(),
            units,
            bits: rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect(),
        })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn units(&self) -> usize {
        self.units
    }

    #[inline]
    pub fn is_on(&self, t: usize, i: usize) -> bool {
        self.bits[t * self.units + i]
    }

    #[inline]
    pub fn set(&mut self, t: usize, i: usize, on: bool) {
        self.bits[t * self.units + i] = on;
    }

    #[inline]
    pub fn toggle(&mut self, t: usize, i: usize) {
        let bit = &mut self.bits[t * self.units + i];
        *bit = !*bit;
    }

    pub fn row(&self, t: usize) -> &[bool] {
        &self.bits[t * self.units..(t + 1) * self.units]
    }

    /// The on/off history of unit `i` across the horizon.
    pub fn unit_states(&self, i: usize) -> impl Iterator<Item = bool> + '_ {
        (0..self.intervals).map(move |t| self.is_on(t, i))
    }

    pub fn committed_capacity(&self, instance: &Instance, t: usize) -> f64 {
        self.row(t)
            .iter()
            .zip(instance.units())
            .filter(|(on, _)| **on)
            .map(|(_, u)| u.p_max)
            .sum()
    }

    pub fn committed_minimum(&self, instance: &Instance, t: usize) -> f64 {
        self.row(t)
            .iter()
            .zip(instance.units())
            .filter(|(on, _)| **on)
            .map(|(_, u)| u.p_min)
            .sum()
    }
}

/// A candidate schedule: unit commitment plus fleet power per interval.
///
/// `ev_power` is positive when the fleet discharges into the grid and
/// negative while it charges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub commitment: Commitment,
    pub ev_power: Vec<f64>,
}

impl Solution {
    pub fn new(commitment: Commitment, ev_power: Vec<f64>) -> Self {
        Self { commitment, ev_power }
    }

    pub fn intervals(&self) -> usize {
        self.ev_power.len()
    }

    pub fn matches(&self, instance: &Instance) -> bool {
        self.commitment.intervals() == instance.intervals()
            && self.commitment.units() == instance.unit_count()
            && self.ev_power.len() == instance.intervals()
    }

    /// Demand left for thermal units at interval `t`.
    #[inline]
    pub fn net_demand(&self, instance: &Instance, t: usize) -> f64 {
        instance.demand()[t] - self.ev_power[t]
    }

    /// Committed capacity above net demand plus the reserve requirement.
    /// Negative values mean the spinning reserve rule is violated.
    pub fn reserve_slack(&self, instance: &Instance, t: usize) -> f64 {
        let net = self.net_demand(instance, t);
        self.commitment.committed_capacity(instance, t) - net - instance.reserve_requirement(net)
    }

    /// Committed spare capacity as a percentage of net demand.
    pub fn reserve_percent(&self, instance: &Instance, t: usize) -> f64 {
        let net = self.net_demand(instance, t);
        100.0 * (self.commitment.committed_capacity(instance, t) - net) / net
    }
}
