//! Configuration-driven command-line front end for the continuation solvers.
//!
//! Each run reads one TOML config, executes the requested computation and
//! writes `result.json` plus plot-ready CSV files into the output directory.
//! Exit codes: 0 success, 2 certified no-solution outcome, 1 numerical
//! failure, 64 configuration errors, 74 i/o errors.

mod config;
mod functions;
mod output;
mod run;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use run::{CliError, CommonOpts};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "contbvp", version, about = "Continuation solvers for nonlinear boundary value problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one of the three applications
    Solve {
        #[command(subcommand)]
        target: SolveTarget,
    },
    /// Compute the solvability range of the forcing mean
    Range {
        #[command(subcommand)]
        target: RangeTarget,
    },
    /// Diagnostic scans
    Scan {
        #[command(subcommand)]
        target: ScanTarget,
    },
    /// Multi-run experiments
    Experiment {
        #[command(subcommand)]
        target: ExperimentTarget,
    },
    /// Worked demonstrations
    Demo {
        #[command(subcommand)]
        target: DemoTarget,
    },
    /// Check declared analytic conditions
    Check {
        #[command(subcommand)]
        target: CheckTarget,
    },
}

#[derive(Subcommand)]
enum SolveTarget {
    /// u'' = f(t, u) with the nonlocal condition u(±L) = g(u(0))
    Nonlocal(CommonArgs),
    /// periodic solutions of u'' + a u' + g(u) = p0 + s
    Resonance(CommonArgs),
    /// positive periodic orbit of the delayed chemostat
    Chemostat(CommonArgs),
}

#[derive(Subcommand)]
enum RangeTarget {
    /// solvability range of the forcing mean s
    Resonance(CommonArgs),
}

#[derive(Subcommand)]
enum ScanTarget {
    /// range-width report (bounds only; degeneracy is never asserted)
    Degeneracy(CommonArgs),
}

#[derive(Subcommand)]
enum ExperimentTarget {
    /// Hausdorff distances of the range under shrinking perturbations
    Continuity(CommonArgs),
}

#[derive(Subcommand)]
enum DemoTarget {
    /// zero finding on the unit square via a fixed-point branch
    PoincareMiranda(CommonArgs),
}

#[derive(Subcommand)]
enum CheckTarget {
    /// wirtinger / nec-suf / ll-limits, selected by the [check] section
    Condition(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory for result.json and the CSV files
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the grid resolution (odd node count)
    #[arg(long)]
    grid: Option<usize>,
    /// Override the solver tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads for embarrassingly parallel sweeps
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl CommonArgs {
    fn opts(&self) -> CommonOpts {
        CommonOpts {
            out: self.out.clone(),
            grid: self.grid,
            tol: self.tol,
            jobs: self.jobs,
        }
    }
}

fn dispatch(command: &Command) -> (&'static str, &CommonArgs) {
    match command {
        Command::Solve { target: SolveTarget::Nonlocal(a) } => ("solve nonlocal", a),
        Command::Solve { target: SolveTarget::Resonance(a) } => ("solve resonance", a),
        Command::Solve { target: SolveTarget::Chemostat(a) } => ("solve chemostat", a),
        Command::Range { target: RangeTarget::Resonance(a) } => ("range resonance", a),
        Command::Scan { target: ScanTarget::Degeneracy(a) } => ("scan degeneracy", a),
        Command::Experiment { target: ExperimentTarget::Continuity(a) } => {
            ("experiment continuity", a)
        }
        Command::Demo { target: DemoTarget::PoincareMiranda(a) } => ("demo poincare-miranda", a),
        Command::Check { target: CheckTarget::Condition(a) } => ("check condition", a),
    }
}

fn execute(name: &str, config: &RunConfig, opts: &CommonOpts) -> Result<i32, CliError> {
    match name {
        "solve nonlocal" => run::run_solve_nonlocal(config, opts),
        "solve resonance" => run::run_solve_resonance(config, opts),
        "solve chemostat" => run::run_solve_chemostat(config, opts),
        "range resonance" => run::run_range_resonance(config, opts),
        "scan degeneracy" => run::run_scan_degeneracy(config, opts),
        "experiment continuity" => run::run_experiment_continuity(config, opts),
        "demo poincare-miranda" => run::run_demo_poincare_miranda(config, opts),
        "check condition" => run::run_check_condition(config, opts),
        _ => unreachable!("dispatch covers every subcommand"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(run::EXIT_CONFIG as u8);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let (name, args) = dispatch(&cli.command);
    let opts = args.opts();
    let config = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(run::EXIT_CONFIG as u8);
        }
    };
    match execute(name, &config, &opts) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            if matches!(err, CliError::Numerical(_)) {
                run::write_failure(&opts.out, name, &err);
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
