use evuc_core::constraints::{check_all, initial_solution, uptime::run_violations, ConstraintKind};
use evuc_core::dispatch::{economic_dispatch, BALANCE_TOLERANCE_MW};
use evuc_core::neighborhood::perturb_in_place;
use evuc_core::{builtin_instance, Mode, SystemSize};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn starting_solutions_are_feasible() {
    for size in SystemSize::ALL {
        for mode in Mode::ALL {
            let inst = builtin_instance(size, mode);
            for seed in 0..1000 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let sol = initial_solution(&inst, &mut rng).unwrap();
                let report = check_all(&inst, &sol);
                assert!(
                    report.feasible(),
                    "{size:?} {mode} seed {seed}: {:?}",
                    report.violations
                );
                let total: f64 = sol.ev_power.iter().sum::<f64>() * inst.interval_hours();
                assert!((total + inst.fleet_consumption_mwh()).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn perturbation_preserves_feasibility() {
    let per_case = 100_000 / 6 + 1;
    for size in SystemSize::ALL {
        for mode in Mode::ALL {
            let inst = builtin_instance(size, mode);
            let mut rng = ChaCha8Rng::seed_from_u64(size.units() as u64);
            let mut sol = initial_solution(&inst, &mut rng).unwrap();
            for step in 0..per_case {
                perturb_in_place(&inst, &mut sol, &mut rng);
                let report = check_all(&inst, &sol);
                assert!(
                    report.feasible(),
                    "{size:?} {mode} step {step}: {:?}",
                    report.violations
                );
            }
        }
    }
}

#[test]
fn commitment_rules_hold_per_unit() {
    let inst = builtin_instance(SystemSize::Twenty, Mode::V2g);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut sol = initial_solution(&inst, &mut rng).unwrap();
    for _ in 0..5_000 {
        perturb_in_place(&inst, &mut sol, &mut rng);
    }
    for (i, unit) in inst.units().iter().enumerate() {
        let states: Vec<bool> = sol.commitment.unit_states(i).collect();
        assert!(run_violations(unit, &states).is_empty());
    }
    assert!(!check_all(&inst, &sol).has(ConstraintKind::MinUpDown));
}

/// Cheapest split of `demand` among `units` found by grid search: 1 MW steps
/// first, then 0.01 MW steps around the coarse optimum. The last unit takes
/// whatever is left. Valid because the cost is convex.
fn grid_dispatch(units: &[&evuc_core::model::ThermalUnit], demand: f64) -> Option<(Vec<f64>, f64)> {
    fn search(
        units: &[&evuc_core::model::ThermalUnit],
        demand: f64,
        ranges: &[(f64, f64)],
        step: f64,
    ) -> Option<(Vec<f64>, f64)> {
        let free = units.len() - 1;
        let counts: Vec<usize> = ranges[..free]
            .iter()
            .map(|(lo, hi)| ((hi - lo) / step).round() as usize + 1)
            .collect();
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut idx = vec![0usize; free];
        loop {
            let mut p: Vec<f64> = (0..free)
                .map(|k| (ranges[k].0 + idx[k] as f64 * step).min(ranges[k].1))
                .collect();
            let last = demand - p.iter().sum::<f64>();
            let u = units[free];
            if last >= u.p_min - 1e-9 && last <= u.p_max + 1e-9 {
                p.push(last);
                let cost: f64 = units.iter().zip(&p).map(|(u, p)| u.fuel_cost(*p)).sum();
                if best.as_ref().is_none_or(|b| cost < b.1) {
                    best = Some((p, cost));
                }
            }
            let mut k = 0;
            loop {
                if k == free {
                    return best;
                }
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
    let full: Vec<(f64, f64)> = units.iter().map(|u| (u.p_min, u.p_max)).collect();
    let (coarse, _) = search(units, demand, &full, 1.0)?;
    let near: Vec<(f64, f64)> = units
        .iter()
        .zip(&coarse)
        .map(|(u, p)| ((p - 2.0).max(u.p_min), (p + 2.0).min(u.p_max)))
        .collect();
    search(units, demand, &near, 0.01)
}

#[test]
fn dispatch_matches_grid_search() {
    let inst = builtin_instance(SystemSize::Ten, Mode::V2g);
    let units = inst.units();
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for a in 0..10 {
        subsets.push(vec![a]);
        for b in a + 1..10 {
            subsets.push(vec![a, b]);
            for c in b + 1..10 {
                subsets.push(vec![a, b, c]);
            }
        }
    }
    let mut compared = 0;
    for subset in &subsets {
        let members: Vec<_> = subset.iter().map(|&i| &units[i]).collect();
        let (min, max): (f64, f64) = members.iter().fold((0.0, 0.0), |(a, b), u| (a + u.p_min, b + u.p_max));
        for demand in [200.0, 500.0, 900.0] {
            if demand < min || demand > max {
                assert!(economic_dispatch(units, subset, demand).is_err());
                continue;
            }
            let ours = economic_dispatch(units, subset, demand).unwrap();
            let (grid, grid_cost) = grid_dispatch(&members, demand).unwrap();
            let our_cost: f64 = members.iter().zip(&ours).map(|(u, p)| u.fuel_cost(*p)).sum();
            assert!(
                our_cost <= grid_cost + 0.5,
                "{subset:?} @ {demand}: {our_cost} vs {grid_cost}"
            );
            for k in 0..subset.len() {
                assert!(
                    (ours[k] - grid[k]).abs() <= 0.05,
                    "{subset:?} @ {demand}: {ours:?} vs {grid:?}"
                );
            }
            compared += 1;
        }
    }
    assert!(compared > 100);
}

proptest! {
    #[test]
    fn dispatch_balances_and_costs_rise_with_demand(mask in 1u32..1024, frac in 0.0f64..1.0, bump in 0.1f64..20.0) {
        let inst = builtin_instance(SystemSize::Ten, Mode::V2g);
        let units = inst.units();
        let committed: Vec<usize> = (0..10).filter(|i| mask >> i & 1 == 1).collect();
        let min: f64 = committed.iter().map(|&i| units[i].p_min).sum();
        let max: f64 = committed.iter().map(|&i| units[i].p_max).sum();
        let demand = min + frac * (max - min - bump).max(0.0);
        let cost = |d: f64| {
            let p = economic_dispatch(units, &committed, d).unwrap();
            prop_assert!((p.iter().sum::<f64>() - d).abs() <= BALANCE_TOLERANCE_MW);
            for (&i, &p) in committed.iter().zip(&p) {
                prop_assert!(p >= units[i].p_min && p <= units[i].p_max);
            }
            Ok(committed.iter().zip(&p).map(|(&i, &p)| units[i].fuel_cost(p)).sum::<f64>())
        };
        let lower = cost(demand)?;
        let upper = cost((demand + bump).min(max))?;
        prop_assert!(upper >= lower - 1e-6);
    }
}
