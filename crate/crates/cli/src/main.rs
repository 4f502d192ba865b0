use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evuc_cli::{
    compare, comparison_report, experiment_report, resolve_instance, resolve_params, run_experiment, schedule_table,
    summary_line, validate_schedule, write_file, CliError, Experiment,
};
use evuc_core::schedule::to_csv;
use evuc_core::Mode;

/// Unit commitment with vehicle-to-grid scheduling, solved by chemical
/// reaction optimization.
#[derive(Parser)]
#[command(name = "evuc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one system repeatedly with independent seeds.
    Run {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the best schedule as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-run JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Do not print the best schedule.
        #[arg(long)]
        quiet: bool,
    },
    /// Solve with and without vehicle-to-grid discharging and compare costs.
    Compare {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the JSON comparison report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check a schedule CSV against every constraint.
    Validate {
        #[arg(long)]
        schedule: PathBuf,
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        /// Rounding step of the MW values in the file (0.01 for two-decimal tables).
        #[arg(long, default_value_t = 1e-6)]
        quantum: f64,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Built-in system size: 10, 20 or 40.
    #[arg(long, conflicts_with = "instance")]
    units: Option<usize>,
    /// Instance TOML file.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Objective evaluations per run [default: 50000].
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// TOML file overriding the CRO parameters.
    #[arg(long)]
    params: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn experiment(instance: &InstanceArgs, mode: Option<Mode>, solver: &SolverArgs) -> Result<Experiment, CliError> {
    if solver.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    Ok(Experiment {
        instance: resolve_instance(instance.units, instance.instance.as_deref(), mode)?,
        params: resolve_params(solver.params.as_deref(), solver.budget)?,
        runs: solver.runs,
        seed: solver.seed,
        jobs: solver.jobs,
    })
}

fn execute(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Run {
            instance,
            mode,
            solver,
            out,
            report,
            quiet,
        } => {
            let exp = experiment(&instance, mode, &solver)?;
            let result = run_experiment(&exp)?;
            let best = &result.best;
            if !quiet {
                print!("{}", schedule_table(&exp.instance, &best.best, &best.dispatch));
                println!();
            }
            println!(
                "{} units, {} model, {} run(s), seed {}",
                exp.instance.unit_count(),
                result.mode,
                result.records.len(),
                exp.seed
            );
            println!("{}", summary_line("CRO", &result.summary));
            if let Some(path) = out {
                write_file(&path, &to_csv(&exp.instance, &best.best, &best.dispatch))?;
            }
            if let Some(path) = report {
                write_file(&path, &experiment_report(&exp, &result))?;
            }
            if !result.summary.all_feasible {
                eprintln!("error: a run ended with an infeasible schedule");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            instance,
            solver,
            report,
        } => {
            let exp = experiment(&instance, None, &solver)?;
            let cmp = compare(&exp)?;
            println!(
                "{} units, {} run(s) per model, seed {}",
                exp.instance.unit_count(),
                solver.runs,
                exp.seed
            );
            println!("{}", summary_line("load-leveling", &cmp.load_leveling.summary));
            println!("{}", summary_line("v2g", &cmp.v2g.summary));
            println!("difference (v2g - load-leveling) {:.2}", cmp.difference());
            if let Some(path) = report {
                write_file(&path, &comparison_report(&exp, &cmp))?;
            }
            let ok = cmp.v2g.summary.all_feasible && cmp.load_leveling.summary.all_feasible;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Validate {
            schedule,
            instance,
            mode,
            quantum,
        } => {
            if quantum.is_nan() || quantum < 0.0 {
                return Err(CliError::Usage("--quantum must be non-negative".into()));
            }
            let inst = resolve_instance(instance.units, instance.instance.as_deref(), mode)?;
            let v = validate_schedule(&inst, &schedule, quantum)?;
            println!("running cost = ${:.2}", v.dispatch.total_cost);
            if v.report.feasible() {
                println!("all constraints satisfied");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("{} violation(s):", v.report.violations.len());
                for violation in &v.report.violations {
                    println!("  {violation}");
                }
                Ok(ExitCode::from(2))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
