//! Command-line front end for the TDKS optimal-control experiments.
//!
//! Exit codes: 0 when every optimization converged, 2 when an optimization
//! stopped at the iteration cap, 3 on any failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tdks::config::ExperimentKind;
use tdks::experiments::{
    default_out_dir, run_convergence_study, run_doublewell_experiment, run_gradcheck,
    run_sweep_nu, run_tracking_experiment, write_gradcheck_report, RunSummary,
};
use tdks::optim::OptStatus;
use tdks::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "tdks",
    about = "Optimal control of time-dependent Kohn-Sham systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (key = value format; see README)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (defaults to <experiment>_out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. --override weights.nu=1e-6 (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Temporal and spatial accuracy study of the splitting scheme
    Converge(CommonArgs),
    /// Density-tracking control experiment (β = 1, η = 0)
    Tracking(CommonArgs),
    /// Double-well charge-transfer experiment (β = 0, η = 1)
    Doublewell(CommonArgs),
    /// Run the configured experiment for every ν in sweep.nu_values
    SweepNu(CommonArgs),
    /// Finite-difference check of the adjoint-based gradient
    Gradcheck(CommonArgs),
}

fn load_config(args: &CommonArgs, default_kind: ExperimentKind) -> tdks::Result<ExperimentConfig> {
    match &args.config {
        Some(path) => ExperimentConfig::load(path, &args.overrides),
        None => {
            let kind_name = match default_kind {
                ExperimentKind::Tracking => "tracking",
                ExperimentKind::DoubleWell => "doublewell",
                ExperimentKind::Convergence => "convergence",
                ExperimentKind::Custom => "custom",
            };
            ExperimentConfig::parse(&format!("experiment = {kind_name}\n"), &args.overrides)
        }
    }
}

fn status_exit(status: OptStatus) -> ExitCode {
    match status {
        OptStatus::Converged => ExitCode::SUCCESS,
        OptStatus::MaxIterations => ExitCode::from(2),
        OptStatus::LineSearchFailed => ExitCode::from(3),
    }
}

fn report_run(name: &str, summary: &RunSummary) {
    println!(
        "{name}: status={} J0={:.6e} J={:.6e} grad_norm={:.6e} iterations={}",
        summary.status.token(),
        summary.initial_cost,
        summary.final_cost.total(),
        summary.gradient_norm,
        summary.iterations
    );
    if let Some(mass) = summary.final_region_mass {
        println!("{name}: final region mass = {mass:.6e}");
    }
    if let Some(dist) = summary.control_target_l2 {
        println!("{name}: |u - u_d|_L2 = {dist:.6e}");
    }
}

fn fail(e: tdks::TdksError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(3)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Converge(args) => {
            let cfg = match load_config(&args, ExperimentKind::Convergence) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let out = args.out.unwrap_or_else(|| default_out_dir(&cfg));
            match run_convergence_study(&cfg, &out) {
                Ok(report) => {
                    println!("temporal slope: {:.4}", report.temporal_slope);
                    for (dt, err) in &report.temporal {
                        println!("dt={dt:.6e} error={err:.6e}");
                    }
                    for (m, err) in &report.spatial {
                        println!("M={m} error={err:.6e}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Tracking(args) => {
            let cfg = match load_config(&args, ExperimentKind::Tracking) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let out = args.out.unwrap_or_else(|| default_out_dir(&cfg));
            match run_tracking_experiment(&cfg, &out) {
                Ok(summary) => {
                    report_run("tracking", &summary);
                    status_exit(summary.status)
                }
                Err(e) => fail(e),
            }
        }
        Command::Doublewell(args) => {
            let cfg = match load_config(&args, ExperimentKind::DoubleWell) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let out = args.out.unwrap_or_else(|| default_out_dir(&cfg));
            match run_doublewell_experiment(&cfg, &out) {
                Ok(summary) => {
                    report_run("doublewell", &summary);
                    status_exit(summary.status)
                }
                Err(e) => fail(e),
            }
        }
        Command::SweepNu(args) => {
            let cfg = match load_config(&args, ExperimentKind::Tracking) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let out = args.out.unwrap_or_else(|| default_out_dir(&cfg).join("sweep"));
            match run_sweep_nu(&cfg, &out) {
                Ok(rows) => {
                    let mut worst = OptStatus::Converged;
                    for (nu, summary) in &rows {
                        report_run(&format!("nu={nu:e}"), summary);
                        worst = match (worst, summary.status) {
                            (_, OptStatus::LineSearchFailed) => OptStatus::LineSearchFailed,
                            (OptStatus::LineSearchFailed, _) => OptStatus::LineSearchFailed,
                            (_, OptStatus::MaxIterations) => OptStatus::MaxIterations,
                            (OptStatus::MaxIterations, _) => OptStatus::MaxIterations,
                            _ => OptStatus::Converged,
                        };
                    }
                    status_exit(worst)
                }
                Err(e) => fail(e),
            }
        }
        Command::Gradcheck(args) => {
            let cfg = match &args.config {
                Some(path) => match ExperimentConfig::load(path, &args.overrides) {
                    Ok(c) => c,
                    Err(e) => return fail(e),
                },
                None => {
                    // small built-in problem: the check is about consistency,
                    // not scale
                    let text = "experiment = custom\ngrid.points = 24\ntime.horizon = 0.1\n\
                                time.steps = 100\ngroundstate.tol = 1e-9\ntracking.amplitude = 5\n";
                    match ExperimentConfig::parse(text, &args.overrides) {
                        Ok(c) => c,
                        Err(e) => return fail(e),
                    }
                }
            };
            match run_gradcheck(&cfg, 5, 1e-4) {
                Ok(report) => {
                    println!("objective trial adjoint fd rel_err");
                    for row in &report.rows {
                        println!(
                            "{} {} {:.9e} {:.9e} {:.3e}",
                            row.objective,
                            row.trial,
                            row.adjoint_pairing,
                            row.finite_difference,
                            row.rel_err
                        );
                    }
                    println!("max rel err: {:.3e}", report.max_rel_err);
                    if let Some(out) = args.out {
                        if let Err(e) = write_gradcheck_report(&report, &out) {
                            return fail(e);
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
