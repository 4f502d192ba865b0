//! Feasible starting schedules.
//!
//! The commitment part is built by a priority-list pre-dispatch followed by
//! repair passes (forced states, spinning reserve, minimum up/down time)
//! that repeat until a pass changes nothing. The EV part starts from an even
//! spread of the fleet's daily charging and moves charge out of intervals
//! whose reserve would otherwise be violated.

use rand::Rng;
use thiserror::Error;

use super::uptime::{runs, Run};
use crate::model::Instance;
use crate::solution::{Commitment, Solution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InitError {
    #[error("no feasible commitment found after {0} restarts")]
    OverConstrained(usize),
    #[error("hour {}: demand plus reserve exceeds the capacity of every available unit", .0 + 1)]
    InsufficientCapacity(usize),
    #[error("no interval has reserve headroom for {0:.3} MWh of EV charging")]
    NoChargingRoom(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitOptions {
    /// Repair passes after the first before the attempt is discarded.
    pub max_recursions: usize,
    /// Fresh attempts before giving up on the instance.
    pub max_restarts: usize,
    /// Relative noise on the unit ranking, redrawn per attempt.
    pub priority_jitter: f64,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            max_recursions: 10,
            max_restarts: 100,
            priority_jitter: 0.1,
        }
    }
}

pub fn initial_uc<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Result<Commitment, InitError> {
    initial_uc_with(instance, rng, &InitOptions::default())
}

pub fn initial_uc_with<R: Rng + ?Sized>(
    instance: &Instance,
    rng: &mut R,
    options: &InitOptions,
) -> Result<Commitment, InitError> {
    for _ in 0..options.max_restarts {
        let order = priority_order(instance, rng, options.priority_jitter);
        let mut commitment = Commitment::all_off(instance.intervals(), instance.unit_count());
        for _ in 0..=options.max_recursions {
            if run_pass(instance, &mut commitment, &order, rng)?.is_clean() {
                return Ok(commitment);
            }
        }
    }
    Err(InitError::OverConstrained(options.max_restarts))
}

/// One forced-state / reserve / up-down repair pass using the plain cost
/// ranking. Returns whether anything had to change.
pub fn repair_pass<R: Rng + ?Sized>(
    instance: &Instance,
    commitment: &mut Commitment,
    rng: &mut R,
) -> Result<bool, InitError> {
    let order = priority_order(instance, rng, 0.0);
    Ok(!run_pass(instance, commitment, &order, rng)?.is_clean())
}

/// Starting commitment plus its even-charging EV vector.
pub fn initial_solution<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Result<Solution, InitError> {
    let commitment = initial_uc(instance, rng)?;
    let ev_power = initial_ev(instance, &commitment)?;
    Ok(Solution::new(commitment, ev_power))
}

/// Units by ascending full-load average cost, each key scaled by a random
/// factor in `[1 - jitter, 1 + jitter]`.
fn priority_order<R: Rng + ?Sized>(instance: &Instance, rng: &mut R, jitter: f64) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = instance
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let noise = if jitter > 0.0 {
                rng.random_range(-jitter..=jitter)
            } else {
                0.0
            };
            (u.full_load_average_cost() * (1.0 + noise), i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

#[derive(Debug, Default)]
struct PassOutcome {
    changed: bool,
    stuck: bool,
}

impl PassOutcome {
    fn is_clean(&self) -> bool {
        !self.changed && !self.stuck
    }
}

fn run_pass<R: Rng + ?Sized>(
    instance: &Instance,
    commitment: &mut Commitment,
    order: &[usize],
    rng: &mut R,
) -> Result<PassOutcome, InitError> {
    let mut outcome = PassOutcome::default();
    outcome.changed |= apply_forced_states(instance, commitment);
    outcome.changed |= cover_reserve(instance, commitment, order)?;
    let (changed, stuck) = repair_up_down(instance, commitment, rng);
    outcome.changed |= changed;
    outcome.stuck |= stuck;
    Ok(outcome)
}

fn apply_forced_states(instance: &Instance, commitment: &mut Commitment) -> bool {
    let mut changed = false;
    for (i, unit) in instance.units().iter().enumerate() {
        for (&t, on) in unit
            .must_run
            .iter()
            .map(|t| (t, true))
            .chain(unit.must_off.iter().map(|t| (t, false)))
        {
            if commitment.is_on(t, i) != on {
                commitment.set(t, i, on);
                changed = true;
            }
        }
    }
    changed
}

/// Capacity each interval should carry: demand, the evenly spread EV
/// charging and spinning reserve, capped at what the units allowed to run
/// can supply. At a tight peak the charging estimate may ask for more than
/// is installed; the EV step then moves that charge elsewhere.
fn capacity_target(instance: &Instance, t: usize) -> f64 {
    let even_charge = instance.fleet_consumption_mwh() / (instance.intervals() as f64 * instance.interval_hours());
    let net = instance.demand()[t] + even_charge;
    let available: f64 = instance
        .units()
        .iter()
        .filter(|u| !u.must_off.contains(&t))
        .map(|u| u.p_max)
        .sum();
    (net + instance.reserve_requirement(net)).min(available)
}

/// Commit units in priority order until every interval meets its
/// [`capacity_target`].
fn cover_reserve(instance: &Instance, commitment: &mut Commitment, order: &[usize]) -> Result<bool, InitError> {
    let mut changed = false;
    for t in 0..instance.intervals() {
        let required = capacity_target(instance, t);
        // Demand plus its own reserve is mandatory.
        let floor = instance.demand()[t] + instance.reserve_requirement(instance.demand()[t]);
        let mut capacity = commitment.committed_capacity(instance, t);
        for &i in order {
            if capacity >= required {
                break;
            }
            let unit = &instance.units()[i];
            if !commitment.is_on(t, i) && !unit.must_off.contains(&t) {
                commitment.set(t, i, true);
                capacity += unit.p_max;
                changed = true;
            }
        }
        if capacity < floor {
            return Err(InitError::InsufficientCapacity(t));
        }
    }
    Ok(changed)
}

/// A candidate repair: set `cells` of one unit to `on`.
struct Fix {
    from: usize,
    to: usize,
    on: bool,
    /// The fix is a first choice: it extends the short run without creating
    /// a new violation in the neighbouring one.
    clean: bool,
}

/// Repair minimum up/down violations unit by unit, always at the earliest
/// violation, by flipping the states next to the offending run. Returns
/// `(changed, stuck)`.
fn repair_up_down<R: Rng + ?Sized>(instance: &Instance, commitment: &mut Commitment, rng: &mut R) -> (bool, bool) {
    let horizon = instance.intervals();
    let mut changed = false;
    let mut stuck = false;
    for (i, unit) in instance.units().iter().enumerate() {
        let mut states: Vec<bool> = commitment.unit_states(i).collect();
        let mut resolved = false;
        for _ in 0..4 * horizon + 8 {
            let runs = runs(unit.initial_state, &states);
            let closed = &runs[..runs.len() - 1];
            let Some(j) = closed.iter().position(|r| {
                let required = if r.on { unit.min_up } else { unit.min_down };
                r.len < required
            }) else {
                resolved = true;
                break;
            };
            let fixes = candidate_fixes(unit, &runs, j, horizon);
            let allowed: Vec<&Fix> = fixes
                .iter()
                .filter(|f| f.from < f.to)
                .filter(|f| {
                    let blocked = if f.on { &unit.must_off } else { &unit.must_run };
                    blocked.range(f.from..f.to).next().is_none()
                })
                .collect();
            // Prefer fixes that neither break the neighbouring run nor take
            // away capacity the reserve step would immediately restore.
            let safe = |f: &Fix| {
                f.on || (f.from..f.to)
                    .all(|t| commitment.committed_capacity(instance, t) - unit.p_max >= capacity_target(instance, t))
            };
            let tiers: [&dyn Fn(&Fix) -> bool; 3] = [&|f| f.clean && safe(f), &|f| safe(f), &|_| true];
            let Some(pool) = tiers
                .iter()
                .map(|keep| allowed.iter().copied().filter(|f| keep(f)).collect::<Vec<_>>())
                .find(|p| !p.is_empty())
            else {
                break;
            };
            let fix = pool[rng.random_range(0..pool.len())];
            states[fix.from..fix.to].fill(fix.on);
            for t in fix.from..fix.to {
                commitment.set(t, i, fix.on);
            }
            changed = true;
        }
        stuck |= !resolved;
    }
    (changed, stuck)
}

fn candidate_fixes(unit: &crate::model::ThermalUnit, runs: &[Run], j: usize, horizon: usize) -> Vec<Fix> {
    let run = runs[j];
    let last = runs.len() - 1;
    let (required, next_required) = if run.on {
        (unit.min_up, unit.min_down)
    } else {
        (unit.min_down, unit.min_up)
    };
    let k = (required - run.len) as usize;
    let mut fixes = Vec::with_capacity(2);

    // Grow the run forward into the next one.
    let next = runs[j + 1];
    let next_left = i64::from(next.len) - k as i64;
    fixes.push(Fix {
        from: run.end,
        to: (run.end + k).min(horizon),
        on: run.on,
        clean: next_left <= 0 || j + 1 == last || next_left >= i64::from(next_required),
    });

    // Grow it backward into the previous one.
    if !run.carried {
        let prev = runs[j - 1];
        let prev_left = i64::from(prev.len) - k as i64;
        let vanishes = !prev.carried && prev.end - prev.begin <= k;
        fixes.push(Fix {
            from: run.begin.saturating_sub(k),
            to: run.begin,
            on: run.on,
            clean: vanishes || prev_left >= i64::from(next_required),
        });
        // Close a short off gap altogether; the merged on run only grows.
        // Kept as a fallback behind the flank flips.
        if !run.on {
            fixes.push(Fix {
                from: run.begin,
                to: run.end,
                on: true,
                clean: false,
            });
        }
    }
    fixes
}

/// Reserve slack treated as zero, so exactly tight intervals stay eligible.
const SLACK_EPS: f64 = 1e-9;

/// Spread the fleet's daily consumption evenly as charging, then move charge
/// away from intervals whose committed capacity cannot carry it plus reserve.
pub fn initial_ev(instance: &Instance, commitment: &Commitment) -> Result<Vec<f64>, InitError> {
    let horizon = instance.intervals();
    let dt = instance.interval_hours();
    let total = instance.fleet_consumption_mwh();
    if total == 0.0 {
        return Ok(vec![0.0; horizon]);
    }
    let margin = 1.0 + instance.reserve_fraction();
    let capacity: Vec<f64> = (0..horizon)
        .map(|t| commitment.committed_capacity(instance, t))
        .collect();
    let demand = instance.demand();
    let slack = |ev: &[f64], t: usize| capacity[t] - margin * (demand[t] - ev[t]);

    let mut ev = vec![-total / (horizon as f64 * dt); horizon];
    for _ in 0..=horizon {
        let violating: Vec<usize> = (0..horizon).filter(|&t| slack(&ev, t) < -SLACK_EPS).collect();
        if violating.is_empty() {
            return Ok(ev);
        }
        // Charge that has to leave the violating intervals (MWh).
        let mut excess = 0.0;
        for &t in &violating {
            let target = demand[t] - capacity[t] / margin;
            if target > 0.0 {
                return Err(InitError::InsufficientCapacity(t));
            }
            excess += (target - ev[t]) * dt;
            ev[t] = target;
        }

        let mut eligible: Vec<usize> = (0..horizon)
            .filter(|t| !violating.contains(t) && slack(&ev, *t) > 0.0)
            .collect();
        loop {
            if eligible.is_empty() {
                return Err(InitError::NoChargingRoom(excess));
            }
            let share = excess / (eligible.len() as f64 * dt);
            let before = eligible.len();
            eligible.retain(|&t| slack(&ev, t) - margin * share >= -SLACK_EPS);
            if eligible.len() == before {
                for &t in &eligible {
                    ev[t] -= share;
                }
                break;
            }
        }
    }
    Err(InitError::NoChargingRoom(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{check_all, uptime::run_violations, ConstraintKind};
    use crate::model::{builtin_instance, EvFleet, Mode, SystemSize, ThermalUnit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_instance(demand_plus_reserve: Vec<f64>, consumption_mwh: f64) -> Instance {
        let unit = ThermalUnit {
            p_max: 100.0,
            p_min: 10.0,
            min_up: 1,
            min_down: 1,
            initial_state: 1,
            ..builtin_instance(SystemSize::Ten, Mode::V2g).units()[9].clone()
        };
        // 1000 vehicles, consumption expressed per vehicle
        let fleet = EvFleet {
            count: 1000,
            avg_capacity_kwh: 100.0,
            charge_frequency: 1.0,
            avg_consumption_kwh: consumption_mwh,
        };
        Instance::new(
            vec![unit.clone(), unit.clone(), unit],
            fleet,
            demand_plus_reserve,
            0.0,
            1.0,
            Mode::V2g,
        )
        .unwrap()
    }

    #[test]
    fn excess_charge_moves_to_intervals_with_headroom() {
        let inst = small_instance(vec![80.0, 290.0, 170.0], 50.0);
        let c = Commitment::from_rows(&[[true, false, false], [true, true, true], [true, true, false]]).unwrap();
        let ev = initial_ev(&inst, &c).unwrap();
        let expected = [-20.0, -10.0, -20.0];
        for (got, want) in ev.iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "{ev:?}");
        }
        assert!((ev.iter().sum::<f64>() + 50.0).abs() < 1e-9);
    }

    #[test]
    fn zero_consumption_means_no_ev_power() {
        let inst = small_instance(vec![80.0, 290.0, 170.0], 0.0);
        let c = Commitment::all_on(3, 3);
        assert_eq!(initial_ev(&inst, &c).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn no_room_for_charge_is_an_error() {
        let inst = small_instance(vec![100.0, 299.0, 200.0], 50.0);
        let c = Commitment::from_rows(&[[true, false, false], [true, true, true], [true, true, false]]).unwrap();
        assert!(initial_ev(&inst, &c).is_err());
    }

    fn three_by_three_unit() -> ThermalUnit {
        ThermalUnit {
            min_up: 3,
            min_down: 3,
            initial_state: 4,
            ..builtin_instance(SystemSize::Ten, Mode::V2g).units()[2].clone()
        }
    }

    #[test]
    fn short_off_gap_flips_a_flank() {
        let unit = three_by_three_unit();
        let states = [true, true, true, true, false, false, true, true, true, true];
        // a must-run companion carries the load, so either flank may go off
        let base = builtin_instance(SystemSize::Ten, Mode::V2g).units()[0].clone();
        let companion = ThermalUnit {
            must_run: (0..10).collect(),
            ..base
        };
        let inst = Instance::new(
            vec![unit.clone(), companion],
            EvFleet::empty(),
            vec![10.0; 10],
            0.0,
            1.0,
            Mode::V2g,
        )
        .unwrap();
        let mut seen = [false; 2];
        for seed in 0..64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = Commitment::from_rows(&states.iter().map(|s| [*s, true]).collect::<Vec<_>>()).unwrap();
            let (changed, stuck) = repair_up_down(&inst, &mut c, &mut rng);
            assert!(changed && !stuck);
            let after: Vec<bool> = c.unit_states(0).collect();
            assert!(run_violations(&unit, &after).is_empty());
            let flipped: Vec<usize> = (0..10).filter(|&t| after[t] != states[t]).collect();
            assert_eq!(flipped.len(), 1, "{after:?}");
            match flipped[0] {
                3 => seen[0] = true,
                6 => seen[1] = true,
                other => panic!("flipped interval {other}"),
            }
            assert!(!after[flipped[0]]);
        }
        assert!(seen[0] && seen[1], "both flanks should be chosen for some seed");
    }

    #[test]
    fn fully_forced_instance_is_all_on() {
        let base = builtin_instance(SystemSize::Ten, Mode::V2g);
        let mut units = base.units().to_vec();
        for u in &mut units {
            u.must_run = (0..24).collect();
        }
        let inst = Instance::new(units, base.fleet().clone(), base.demand().to_vec(), 0.1, 1.0, Mode::V2g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(initial_uc(&inst, &mut rng).unwrap(), Commitment::all_on(24, 10));
    }

    #[test]
    fn impossible_reserve_is_reported() {
        let base = builtin_instance(SystemSize::Ten, Mode::V2g);
        let mut demand = base.demand().to_vec();
        demand[11] = 1650.0;
        let inst = Instance::new(base.units().to_vec(), base.fleet().clone(), demand, 0.1, 1.0, Mode::V2g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(initial_uc(&inst, &mut rng), Err(InitError::InsufficientCapacity(11)));
    }

    #[test]
    fn generated_commitments_satisfy_unit_constraints() {
        for size in SystemSize::ALL {
            let inst = builtin_instance(size, Mode::V2g);
            let mut rng = ChaCha8Rng::seed_from_u64(size.units() as u64);
            for _ in 0..200 {
                let sol = initial_solution(&inst, &mut rng).unwrap();
                let report = check_all(&inst, &sol);
                for kind in [
                    ConstraintKind::MustRunOff,
                    ConstraintKind::SpinningReserve,
                    ConstraintKind::MinUpDown,
                ] {
                    assert!(!report.has(kind), "{size:?}: {:?}", report.violations);
                }
            }
        }
    }

    #[test]
    fn repair_is_idempotent_on_feasible_commitments() {
        let inst = builtin_instance(SystemSize::Ten, Mode::LoadLeveling);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let c = initial_uc(&inst, &mut rng).unwrap();
            let mut again = c.clone();
            assert!(!repair_pass(&inst, &mut again, &mut rng).unwrap());
            assert_eq!(again, c);
        }
    }
}
