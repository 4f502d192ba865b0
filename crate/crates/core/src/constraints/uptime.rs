//! Minimum up/down time bookkeeping over one unit's on/off history.

use crate::model::ThermalUnit;

/// A maximal block of identical states in a unit's history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub on: bool,
    /// First interval of the block inside the horizon.
    pub begin: usize,
    /// One past the last interval of the block.
    pub end: usize,
    /// Length including hours carried over from before the horizon.
    pub len: u32,
    /// True when the block continues the unit's initial state.
    pub carried: bool,
}

/// Split `states` into runs.
///
/// The first run always continues the unit's initial state. If the unit
/// switches right at the first interval that run has no in-horizon cells
/// (`begin == end == 0`) but still carries its pre-horizon length.
pub fn runs(initial_state: i32, states: &[bool]) -> Vec<Run> {
    let mut out = vec![Run {
        on: initial_state > 0,
        begin: 0,
        end: 0,
        len: initial_state.unsigned_abs(),
        carried: true,
    }];
    for (t, &on) in states.iter().enumerate() {
        let last = out.last_mut().expect("non-empty");
        if last.on == on {
            last.end = t + 1;
            last.len += 1;
        } else {
            out.push(Run {
                on,
                begin: t,
                end: t + 1,
                len: 1,
                carried: false,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunViolation {
    /// Shut down at `at` after only `len` hours online.
    MinUp { at: usize, len: u32, required: u32 },
    /// Started at `at` after only `len` hours offline.
    MinDown { at: usize, len: u32, required: u32 },
}

impl RunViolation {
    pub fn interval(&self) -> usize {
        match *self {
            RunViolation::MinUp { at, .. } | RunViolation::MinDown { at, .. } => at,
        }
    }

    pub fn shortfall(&self) -> u32 {
        match *self {
            RunViolation::MinUp { len, required, .. } | RunViolation::MinDown { len, required, .. } => required - len,
        }
    }
}

fn violation_of(unit: &ThermalUnit, run: &Run) -> Option<RunViolation> {
    if run.on && run.len < unit.min_up {
        Some(RunViolation::MinUp {
            at: run.end,
            len: run.len,
            required: unit.min_up,
        })
    } else if !run.on && run.len < unit.min_down {
        Some(RunViolation::MinDown {
            at: run.end,
            len: run.len,
            required: unit.min_down,
        })
    } else {
        None
    }
}

/// Every switch that happens before the required run length is reached.
///
/// A run that is still in progress at the end of the horizon is not judged.
pub fn run_violations(unit: &ThermalUnit, states: &[bool]) -> Vec<RunViolation> {
    let runs = runs(unit.initial_state, states);
    let closed = runs.len().saturating_sub(1);
    runs[..closed].iter().filter_map(|r| violation_of(unit, r)).collect()
}

/// Allocation-free check of the minimum up/down rule.
pub fn satisfies_min_up_down(unit: &ThermalUnit, states: impl Iterator<Item = bool>) -> bool {
    let mut on = unit.initial_state > 0;
    let mut len = unit.initial_state.unsigned_abs();
    for state in states {
        if state == on {
            len += 1;
            continue;
        }
        let required = if on { unit.min_up } else { unit.min_down };
        if len < required {
            return false;
        }
        on = state;
        len = 1;
    }
    true
}
