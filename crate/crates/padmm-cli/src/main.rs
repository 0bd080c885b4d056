//! `padmm` — scenario runner for the online perturbed proximal-ADMM solver.
//!
//! ```text
//! padmm run <config.json> [--out DIR] [--seed N]
//! padmm sweep <config.json> --axis NAME --values CSVLIST [--workers N] [--out DIR] [--seed N]
//! ```
//!
//! The output directory defaults to `$PADMM_OUT`, then `./padmm-out`.
//! Exit codes: 0 all checks passed, 1 a check failed, 2 schema violation,
//! 3 divergence (partial CSVs retained), 4 oracle failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use padmm_cli::runner::{resolve_out_dir, run_from_path};
use padmm_cli::sweep::run_sweep;

#[derive(Parser)]
#[command(
    name = "padmm",
    version,
    about = "Online perturbed proximal-ADMM scenario runner"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario config and write trajectory/oracle CSVs plus a JSON report.
    Run {
        /// Scenario config file (JSON).
        config: PathBuf,
        /// Output directory (default: $PADMM_OUT, then ./padmm-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the scenario once per axis value and aggregate summary rows.
    Sweep {
        /// Scenario config file (JSON).
        config: PathBuf,
        /// Axis to vary: gamma, beta, drift_amplitude, or seed.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long)]
        values: String,
        /// Concurrent sweep points.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Output directory (default: $PADMM_OUT, then ./padmm-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run { config, out, seed } => {
            let out_dir = resolve_out_dir(out);
            match run_from_path(&config, &out_dir, seed) {
                Ok(run) => {
                    let s = &run.report.summary;
                    println!(
                        "scenario {} ({}): {} steps, all_ok={}, exit {}",
                        run.report.scenario,
                        run.report.kind,
                        run.report.steps.len(),
                        s.all_ok,
                        run.exit_code
                    );
                    if let Some(r) = s.max_contraction_ratio {
                        println!("  max contraction ratio: {r:.6}");
                    }
                    if let Some(e) = s.steady_state_g_err {
                        println!("  steady-state g_err:    {e:.6e}");
                    }
                    if let Some(b) = s.tracking_bound {
                        println!("  tracking bound:        {b:.6e}");
                    }
                    println!("  artifacts in {}", out_dir.display());
                    run.exit_code
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Cmd::Sweep {
            config,
            axis,
            values,
            workers,
            out,
            seed,
        } => {
            let out_dir = resolve_out_dir(out);
            match run_sweep(&config, &out_dir, &axis, &values, workers, seed) {
                Ok((rows, exit)) => {
                    println!(
                        "sweep over {axis}: {} points, exit {exit}; sweep.csv in {}",
                        rows.len(),
                        out_dir.display()
                    );
                    exit
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
    };
    ExitCode::from(code.clamp(0, u8::MAX as i32) as u8)
}
