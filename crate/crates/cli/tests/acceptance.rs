//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Reference figures are the published results for the 10/20/40-unit
//! systems; tolerances are the agreed acceptance bands.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use evuc_cli::{compare, validate_schedule, Comparison, Experiment};
use evuc_core::constraints::{check_all, initial_solution};
use evuc_core::cro::Reactor;
use evuc_core::dispatch::economic_dispatch;
use evuc_core::model::ThermalUnit;
use evuc_core::neighborhood::perturb_in_place;
use evuc_core::schedule::{parse_csv, to_csv};
use evuc_core::{builtin_instance, evaluate, CroParams, Mode, SystemSize};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const RUNS: u64 = 100;
const SEED: u64 = 2024;

struct Reference {
    size: SystemSize,
    best_v2g: f64,
    best_tolerance: f64,
    difference: f64,
}

const REFERENCES: [Reference; 3] = [
    Reference {
        size: SystemSize::Ten,
        best_v2g: 564_727.87,
        best_tolerance: 0.005,
        difference: -7_739.43,
    },
    Reference {
        size: SystemSize::Twenty,
        best_v2g: 1_128_131.28,
        best_tolerance: 0.0075,
        difference: -17_065.45,
    },
    Reference {
        size: SystemSize::Forty,
        best_v2g: 2_257_690.96,
        best_tolerance: 0.01,
        difference: -28_703.63,
    },
];

const LOAD_LEVELING_BEST_10: f64 = 572_467.30;
const MEAN_V2G_10: f64 = 565_019.42;

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn relative(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn experiments() -> Vec<(SystemSize, Comparison)> {
    REFERENCES
        .iter()
        .map(|r| {
            let exp = Experiment {
                instance: builtin_instance(r.size, Mode::V2g),
                params: CroParams::default(),
                runs: RUNS,
                seed: SEED,
                jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            };
            (r.size, compare(&exp).expect("solver runs"))
        })
        .collect()
}

fn best_cost_criteria(results: &[(SystemSize, Comparison)], out: &mut Vec<Outcome>) {
    let ten = &results[0].1;
    let best = ten.v2g.summary.best_cost;
    out.push(Outcome {
        id: "1",
        name: "10-unit V2G best cost",
        pass: relative(best, REFERENCES[0].best_v2g) <= 0.005,
        detail: format!(
            "best {best:.2} vs {:.2} ({:+.3}%, band 0.5%)",
            REFERENCES[0].best_v2g,
            100.0 * (best - REFERENCES[0].best_v2g) / REFERENCES[0].best_v2g
        ),
    });

    let best = ten.load_leveling.summary.best_cost;
    out.push(Outcome {
        id: "2",
        name: "10-unit load-leveling best cost",
        pass: relative(best, LOAD_LEVELING_BEST_10) <= 0.005,
        detail: format!(
            "best {best:.2} vs {LOAD_LEVELING_BEST_10:.2} ({:+.3}%, band 0.5%)",
            100.0 * (best - LOAD_LEVELING_BEST_10) / LOAD_LEVELING_BEST_10
        ),
    });

    let mean = ten.v2g.summary.mean_cost;
    out.push(Outcome {
        id: "3",
        name: "10-unit V2G mean cost",
        pass: relative(mean, MEAN_V2G_10) <= 0.01,
        detail: format!(
            "mean {mean:.2} vs {MEAN_V2G_10:.2} ({:+.3}%, band 1%), best {:.2}",
            100.0 * (mean - MEAN_V2G_10) / MEAN_V2G_10,
            ten.v2g.summary.best_cost
        ),
    });

    let mut pass = true;
    let mut detail = Vec::new();
    for (r, (_, cmp)) in REFERENCES.iter().zip(results).skip(1) {
        let best = cmp.v2g.summary.best_cost;
        pass &= relative(best, r.best_v2g) <= r.best_tolerance;
        detail.push(format!(
            "{}-unit {best:.2} vs {:.2} ({:+.3}%, band {}%)",
            r.size.units(),
            r.best_v2g,
            100.0 * (best - r.best_v2g) / r.best_v2g,
            100.0 * r.best_tolerance
        ));
    }
    out.push(Outcome {
        id: "4",
        name: "20/40-unit V2G best cost",
        pass,
        detail: detail.join("; "),
    });

    let mut pass = true;
    let mut detail = Vec::new();
    for (r, (_, cmp)) in REFERENCES.iter().zip(results) {
        let diff = cmp.difference();
        pass &= diff < 0.0 && relative(diff, r.difference) <= 0.5;
        detail.push(format!("{}-unit {diff:.2} vs {:.2}", r.size.units(), r.difference));
    }
    out.push(Outcome {
        id: "5",
        name: "V2G cheaper than load-leveling",
        pass,
        detail: detail.join("; "),
    });
}

fn fixture_criterion(out: &mut Vec<Outcome>) {
    let mut pass = true;
    let mut detail = Vec::new();
    for (file, mode, printed) in [
        ("load_leveling_best.csv", Mode::LoadLeveling, 572_467.30),
        ("v2g_best.csv", Mode::V2g, 564_727.87),
    ] {
        let inst = builtin_instance(SystemSize::Ten, mode);
        let v = validate_schedule(&inst, &fixture(file), 0.01).expect("fixture parses");
        let cost = v.dispatch.total_cost;
        pass &= v.report.feasible() && (cost - printed).abs() <= 10.0;
        detail.push(format!(
            "{mode}: {} violation(s), cost {cost:.2} vs {printed:.2}",
            v.report.violations.len()
        ));
    }
    out.push(Outcome {
        id: "6",
        name: "published schedules validate",
        pass,
        detail: detail.join("; "),
    });
}

fn closure_criterion(results: &[(SystemSize, Comparison)], out: &mut Vec<Outcome>) {
    const CALLS: usize = 100_000;
    let cases: Vec<(SystemSize, Mode)> = SystemSize::ALL
        .iter()
        .flat_map(|&s| Mode::ALL.iter().map(move |&m| (s, m)))
        .collect();
    let mut infeasible = 0usize;
    let mut calls = 0usize;
    for (k, &(size, mode)) in cases.iter().enumerate() {
        let inst = builtin_instance(size, mode);
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + k as u64);
        let mut sol = initial_solution(&inst, &mut rng).expect("feasible start");
        let share = CALLS / cases.len() + usize::from(k < CALLS % cases.len());
        for _ in 0..share {
            perturb_in_place(&inst, &mut sol, &mut rng);
            calls += 1;
            if !check_all(&inst, &sol).feasible() {
                infeasible += 1;
            }
        }
    }

    // Every run's best schedule, plus the CSV round trip of each overall best.
    let mut solver_schedules = 0;
    let mut solver_infeasible = 0;
    for (size, cmp) in results {
        for result in [&cmp.v2g, &cmp.load_leveling] {
            solver_schedules += result.records.len();
            solver_infeasible += result.records.iter().filter(|r| !r.feasible).count();
            let inst = builtin_instance(*size, result.mode);
            let csv = to_csv(&inst, &result.best.best, &result.best.dispatch);
            let parsed = parse_csv(&inst, &csv).expect("own CSV parses");
            solver_schedules += 1;
            if !check_all(&inst, &parsed.solution).feasible() {
                solver_infeasible += 1;
            }
        }
    }
    out.push(Outcome {
        id: "7",
        name: "constraint closure",
        pass: calls == CALLS && infeasible == 0 && solver_infeasible == 0,
        detail: format!(
            "{infeasible}/{calls} infeasible perturbations; {solver_infeasible}/{solver_schedules} infeasible solver schedules"
        ),
    });
}

/// Convex grid search: 1 MW steps, then 0.01 MW steps within 2 MW of the
/// coarse optimum; the last unit covers the remainder.
fn grid_dispatch(units: &[&ThermalUnit], demand: f64) -> Option<(Vec<f64>, f64)> {
    fn search(units: &[&ThermalUnit], demand: f64, ranges: &[(f64, f64)], step: f64) -> Option<(Vec<f64>, f64)> {
        let free = units.len() - 1;
        let counts: Vec<usize> = ranges[..free]
            .iter()
            .map(|(lo, hi)| ((hi - lo) / step).round() as usize + 1)
            .collect();
        let mut idx = vec![0usize; free];
        let mut best: Option<(Vec<f64>, f64)> = None;
        'outer: loop {
            let mut p: Vec<f64> = (0..free)
                .map(|k| (ranges[k].0 + idx[k] as f64 * step).min(ranges[k].1))
                .collect();
            let rest = demand - p.iter().sum::<f64>();
            if rest >= units[free].p_min - 1e-9 && rest <= units[free].p_max + 1e-9 {
                p.push(rest);
                let cost: f64 = units.iter().zip(&p).map(|(u, p)| u.fuel_cost(*p)).sum();
                if best.as_ref().is_none_or(|b| cost < b.1) {
                    best = Some((p, cost));
                }
            }
            for k in 0..free {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            return best;
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

fn dispatch_oracle_criterion(out: &mut Vec<Outcome>) {
    let inst = builtin_instance(SystemSize::Ten, Mode::V2g);
    let units = inst.units();
    let mut subsets = Vec::new();
    for a in 0..10 {
        subsets.push(vec![a]);
        for b in a + 1..10 {
            subsets.push(vec![a, b]);
            for c in b + 1..10 {
                subsets.push(vec![a, b, c]);
            }
        }
    }
    let (mut compared, mut failures) = (0, 0);
    let (mut worst_mw, mut worst_cost) = (0.0f64, 0.0f64);
    for subset in &subsets {
        let members: Vec<&ThermalUnit> = subset.iter().map(|&i| &units[i]).collect();
        for demand in [200.0, 500.0, 900.0] {
            let Some((grid, grid_cost)) = grid_dispatch(&members, demand) else {
                if economic_dispatch(units, subset, demand).is_ok() {
                    failures += 1;
                }
                continue;
            };
            compared += 1;
            let Ok(ours) = economic_dispatch(units, subset, demand) else {
                failures += 1;
                continue;
            };
            let cost: f64 = members.iter().zip(&ours).map(|(u, p)| u.fuel_cost(*p)).sum();
            let mw = ours.iter().zip(&grid).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst_mw = worst_mw.max(mw);
            worst_cost = worst_cost.max(cost - grid_cost);
            if mw > 0.05 || cost > grid_cost + 0.5 {
                failures += 1;
            }
        }
    }
    out.push(Outcome {
        id: "8",
        name: "economic dispatch vs grid search",
        pass: failures == 0 && compared > 0,
        detail: format!("{compared} feasible cases, {failures} failure(s), worst {worst_mw:.4} MW / ${worst_cost:+.4}"),
    });
}

fn energy_criterion(out: &mut Vec<Outcome>) {
    let inst = builtin_instance(SystemSize::Ten, Mode::V2g);
    let mut reactor = Reactor::new(&inst, CroParams::default(), SEED).expect("reactor starts");
    let initial = reactor.total_energy();
    let mut worst = 0.0f64;
    let mut reactions = 0u64;
    while reactor.step().is_some() {
        reactions += 1;
        worst = worst.max(relative(reactor.total_energy(), initial));
    }
    out.push(Outcome {
        id: "9",
        name: "energy conservation",
        pass: worst <= 1e-6 && reactor.evaluations() >= 50_000,
        detail: format!(
            "max relative drift {worst:.2e} over {reactions} reactions / {} evaluations",
            reactor.evaluations()
        ),
    });
}

fn determinism_criterion(out: &mut Vec<Outcome>) {
    let dir = tempfile::tempdir().expect("temp dir");
    let run = |name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_evuc"))
            .args(["run", "--units", "10", "--mode", "v2g", "--runs", "3", "--jobs", "2"])
            .args(["--budget", "20000", "--seed", "7", "--quiet", "--out"])
            .arg(&path)
            .output()
            .expect("binary runs");
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(path).expect("CSV written")
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    out.push(Outcome {
        id: "10",
        name: "deterministic schedule CSV",
        pass: !a.is_empty() && a == b,
        detail: format!("{} bytes, identical: {}", a.len(), a == b),
    });
}

fn main() {
    let start = Instant::now();
    let mut outcomes = Vec::new();
    let results = experiments();
    let solve_time = start.elapsed().as_secs_f64();
    best_cost_criteria(&results, &mut outcomes);
    fixture_criterion(&mut outcomes);
    closure_criterion(&results, &mut outcomes);
    dispatch_oracle_criterion(&mut outcomes);
    energy_criterion(&mut outcomes);
    determinism_criterion(&mut outcomes);

    // sanity: the fixture totals come from the same evaluate() as the solver
    let inst = builtin_instance(SystemSize::Ten, Mode::V2g);
    let text = std::fs::read_to_string(fixture("v2g_best.csv")).expect("fixture");
    let parsed = parse_csv(&inst, &text).expect("fixture parses");
    assert!(evaluate(&inst, &parsed.solution).is_ok());

    println!();
    for o in &outcomes {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{:>2}] {}: {}", o.id, o.name, o.detail);
    }
    println!(
        "acceptance: {} runs per model and size in {solve_time:.1} s, total {:.1} s",
        RUNS,
        start.elapsed().as_secs_f64()
    );
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
