//! The single-solution move shared by every elementary reaction.
//!
//! First try to flip one commitment bit. If the flip breaks the reserve,
//! minimum up/down or dispatchability rules it is undone and the move
//! instead shifts EV energy from one interval to another, sized by a
//! Gaussian draw bounded by what both intervals can absorb.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::constraints::{charged_energy, satisfies_min_up_down, soc_within_limits};
use crate::model::{Instance, Mode};
use crate::solution::Solution;

/// Numerical slack for the guards inside the move.
const EPS: f64 = 1e-9;
const MAX_REDRAWS: usize = 100;

/// What a call to [`perturb_in_place`] changed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Move {
    Toggled { t: usize, i: usize },
    Shifted { inc: usize, dec: usize, amount: f64 },
    Unchanged,
}

pub fn perturb<R: Rng + ?Sized>(instance: &Instance, solution: &Solution, rng: &mut R) -> Solution {
    let mut next = solution.clone();
    perturb_in_place(instance, &mut next, rng);
    next
}

pub fn perturb_in_place<R: Rng + ?Sized>(instance: &Instance, solution: &mut Solution, rng: &mut R) -> Move {
    if let Some((t, i)) = pick_free_cell(instance, rng) {
        if try_toggle(instance, solution, t, i) {
            return Move::Toggled { t, i };
        }
    }
    shift_ev(instance, solution, rng)
}

pub fn pick_free_cell<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Option<(usize, usize)> {
    let cells = instance.free_cells();
    if cells.is_empty() {
        None
    } else {
        Some(cells[rng.random_range(0..cells.len())])
    }
}

/// Flip `(t, i)` and keep the flip only if reserve, minimum up/down time and
/// dispatchability at `t` still hold.
pub fn try_toggle(instance: &Instance, solution: &mut Solution, t: usize, i: usize) -> bool {
    solution.commitment.toggle(t, i);
    let unit = &instance.units()[i];
    let ok = solution.reserve_slack(instance, t) >= -EPS
        && solution.commitment.committed_minimum(instance, t) <= solution.net_demand(instance, t) + EPS
        && satisfies_min_up_down(unit, solution.commitment.unit_states(i));
    if !ok {
        solution.commitment.toggle(t, i);
    }
    ok
}

/// How far EV output may rise at `t` before committed units would have to
/// go below their minimum outputs.
pub fn increase_range(instance: &Instance, solution: &Solution, t: usize) -> f64 {
    solution.net_demand(instance, t) - solution.commitment.committed_minimum(instance, t)
}

/// How far EV output may fall at `t` before the spinning reserve rule
/// breaks. Lowering EV output by `x` raises net demand by `x` and the
/// reserve requirement by `reserve_fraction * x`.
pub fn decrease_range(instance: &Instance, solution: &Solution, t: usize) -> f64 {
    solution.reserve_slack(instance, t) / (1.0 + instance.reserve_fraction())
}

/// Move `amount` MW of EV output from interval `from` to interval `to`.
#[inline]
pub fn transfer_ev(ev_power: &mut [f64], to: usize, from: usize, amount: f64) {
    ev_power[to] += amount;
    ev_power[from] -= amount;
}

fn shift_ev<R: Rng + ?Sized>(instance: &Instance, solution: &mut Solution, rng: &mut R) -> Move {
    let horizon = instance.intervals();
    if horizon < 2 {
        return Move::Unchanged;
    }
    let inc = rng.random_range(0..horizon);
    let mut dec = rng.random_range(0..horizon - 1);
    if dec >= inc {
        dec += 1;
    }

    let range = increase_range(instance, solution, inc).min(decrease_range(instance, solution, dec));
    if !(range > 0.0) {
        return Move::Unchanged;
    }
    let normal = Normal::new(0.0, range / 3.0).expect("positive spread");
    let amount = (0..MAX_REDRAWS)
        .map(|_| normal.sample(rng))
        .find(|v| v.abs() <= range)
        .map_or(0.0, f64::abs);
    if amount == 0.0 {
        return Move::Unchanged;
    }

    let (old_inc, old_dec) = (solution.ev_power[inc], solution.ev_power[dec]);
    transfer_ev(&mut solution.ev_power, inc, dec, amount);
    let ev = &solution.ev_power;
    let ok = soc_within_limits(instance, ev, EPS)
        && charged_energy(instance, ev) <= instance.charge_limit_mwh() + EPS
        && (instance.mode() != Mode::LoadLeveling || ev[inc] <= 0.0);
    if ok {
        Move::Shifted { inc, dec, amount }
    } else {
        solution.ev_power[inc] = old_inc;
        solution.ev_power[dec] = old_dec;
        Move::Unchanged
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::initial_solution;
    use crate::model::{builtin_instance, EvFleet, SystemSize, ThermalUnit};
    use crate::solution::Commitment;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_instance() -> Instance {
        let unit = ThermalUnit {
            p_max: 100.0,
            p_min: 10.0,
            min_up: 1,
            min_down: 1,
            initial_state: 1,
            ..builtin_instance(SystemSize::Ten, Mode::V2g).units()[9].clone()
        };
        let fleet = EvFleet {
            count: 1000,
            avg_capacity_kwh: 100.0,
            charge_frequency: 1.0,
            avg_consumption_kwh: 50.0,
        };
        Instance::new(
            vec![unit.clone(), unit.clone(), unit],
            fleet,
            vec![80.0, 290.0, 170.0],
            0.0,
            1.0,
            Mode::V2g,
        )
        .unwrap()
    }

    #[test]
    fn toggle_flips_one_bit_and_leaves_ev_alone() {
        let inst = example_instance();
        let rows = [[true, false, false], [true, true, true], [true, true, false]];
        let mut sol = Solution::new(Commitment::from_rows(&rows).unwrap(), vec![-20.0, -10.0, -20.0]);
        assert!(try_toggle(&inst, &mut sol, 0, 1));
        let expected = [[true, true, false], [true, true, true], [true, true, false]];
        assert_eq!(sol.commitment, Commitment::from_rows(&expected).unwrap());
        assert_eq!(sol.ev_power, vec![-20.0, -10.0, -20.0]);
    }

    #[test]
    fn toggle_breaking_min_down_is_reverted() {
        let inst = builtin_instance(SystemSize::Ten, Mode::V2g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sol = initial_solution(&inst, &mut rng).unwrap();
        // unit 1 runs all day in every starting schedule; switching it off at
        // noon would leave a 1-hour gap against an 8-hour minimum down time
        assert!((0..24).all(|t| sol.commitment.is_on(t, 0)));
        let mut probe = sol.clone();
        assert!(!try_toggle(&inst, &mut probe, 12, 0));
        assert_eq!(probe, sol);
    }

    #[test]
    fn decrease_range_on_table_hour_twelve() {
        let inst = builtin_instance(SystemSize::Ten, Mode::V2g);
        let mut c = Commitment::all_off(24, 10);
        for i in 0..8 {
            c.set(11, i, true);
        }
        let mut ev = vec![0.0; 24];
        ev[11] = 120.75;
        let sol = Solution::new(c, ev);
        let net = 1500.0 - 120.75;
        let slack = 1552.0 + 120.75 - 1500.0 - 0.1 * net;
        assert!((decrease_range(&inst, &sol, 11) - slack / 1.1).abs() < 1e-9);
        let min_total = 150.0 + 150.0 + 20.0 + 20.0 + 25.0 + 20.0 + 25.0 + 10.0;
        assert!((increase_range(&inst, &sol, 11) - (net - min_total)).abs() < 1e-9);
    }

    #[test]
    fn transfer_is_symmetric() {
        let mut a = vec![1.0, -2.0, 3.5, 0.25];
        let mut b = a.clone();
        transfer_ev(&mut a, 1, 3, 0.75);
        transfer_ev(&mut b, 3, 1, -0.75);
        assert_eq!(a, b);
    }

    #[test]
    fn free_cells_are_picked_uniformly() {
        let inst = builtin_instance(SystemSize::Ten, Mode::V2g);
        let cells = inst.free_cells().len();
        let per_cell = 400usize;
        let mut counts = vec![0usize; 24 * 10];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..cells * per_cell {
            let (t, i) = pick_free_cell(&inst, &mut rng).unwrap();
            counts[t * 10 + i] += 1;
        }
        let expected = per_cell as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99.9th percentile of chi-square with 239 degrees of freedom is about 311
        assert!(chi2 < 311.0, "chi2 = {chi2}");
    }

    #[test]
    fn load_leveling_never_discharges() {
        let inst = builtin_instance(SystemSize::Ten, Mode::LoadLeveling);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut sol = initial_solution(&inst, &mut rng).unwrap();
        for _ in 0..20_000 {
            perturb_in_place(&inst, &mut sol, &mut rng);
            assert!(sol.ev_power.iter().all(|p| *p <= 0.0));
        }
    }

    #[test]
    fn shifts_conserve_fleet_energy() {
        let inst = builtin_instance(SystemSize::Ten, Mode::V2g);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut sol = initial_solution(&inst, &mut rng).unwrap();
        let mut shifted = 0;
        for _ in 0..20_000 {
            let before: f64 = sol.ev_power.iter().sum();
            if let Move::Shifted { amount, .. } = perturb_in_place(&inst, &mut sol, &mut rng) {
                assert!(amount > 0.0);
                shifted += 1;
            }
            let after: f64 = sol.ev_power.iter().sum();
            assert!((after - before).abs() <= 1e-9);
        }
        assert!(shifted > 100);
    }
}
