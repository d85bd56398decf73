//! Command-line front end: run, sweep and verify experiments.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use localbatch::config::ExperimentConfig;
use localbatch::engine::Termination;
use localbatch::harness::{self, exit_code, SweepSpec};
use localbatch::metrics::CheckStatus;

#[derive(Parser)]
#[command(
    name = "localbatch",
    about = "Multi-worker local gradient training simulator with adaptive batch sizes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one training run and write metrics plus a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config value; repeatable. Example: --set controller.eta=0.5
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run seed (overrides run.seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the Cartesian grid of local steps x eta x seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Local-step counts, comma separated.
        #[arg(long = "h", value_delimiter = ',', required = true)]
        local_steps: Vec<usize>,
        /// Test constants, comma separated; defaults to the config value.
        #[arg(long = "eta", value_delimiter = ',')]
        etas: Vec<f64>,
        /// Seeds, comma separated.
        #[arg(long = "seeds", value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        /// Run grid cells on a thread pool (outputs are unchanged).
        #[arg(long)]
        parallel: bool,
    },
    /// Re-check metrics produced by `run` or `sweep`.
    Verify {
        /// A run directory, or a directory containing run directories.
        #[arg(long)]
        dir: PathBuf,
    },
}

fn load_or_exit(
    config: &Path,
    set: &[String],
    out: Option<&PathBuf>,
    seed: Option<u64>,
) -> Result<ExperimentConfig, i32> {
    harness::load_config(config, set, out.map(|p| p.as_path()), seed).map_err(|issues| {
        eprintln!("configuration error(s):");
        for issue in &issues {
            eprintln!("  {issue}");
        }
        exit_code::CONFIG_ERROR
    })
}

fn run_main(cli: Cli) -> i32 {
    match cli.command {
        Command::Run { config, set, out, seed } => {
            let cfg = match load_or_exit(&config, &set, out.as_ref(), seed) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match harness::cmd_run(&cfg) {
                Ok(summary) => {
                    println!(
                        "run complete: rounds={} samples={} mean_batch={:.1} final_loss={:.6e} wallclock={:.3}s",
                        summary.rounds,
                        summary.samples_processed,
                        summary.mean_batch_size,
                        summary.final_loss,
                        summary.wallclock_s
                    );
                    match summary.termination {
                        Termination::Diverged { round, reason } => {
                            eprintln!("run diverged at round {round}: {reason}");
                            exit_code::RUN_FAILURE
                        }
                        _ => exit_code::SUCCESS,
                    }
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    exit_code::RUN_FAILURE
                }
            }
        }
        Command::Sweep {
            config,
            set,
            out,
            local_steps,
            etas,
            seeds,
            parallel,
        } => {
            let cfg = match load_or_exit(&config, &set, out.as_ref(), None) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let spec = SweepSpec { local_steps, etas, seeds, parallel };
            match harness::cmd_sweep(&cfg, &spec) {
                Ok(report) => {
                    for row in &report.rows {
                        println!(
                            "{} H={} seed={} steps={} mean_batch={:.1} final_loss={:.6e} [{}]",
                            row.schedule,
                            row.local_steps,
                            row.seed,
                            row.steps,
                            row.mean_batch_size,
                            row.final_loss,
                            row.status
                        );
                    }
                    println!("aggregate written to {}", report.aggregate_path.display());
                    if report.all_ok() {
                        exit_code::SUCCESS
                    } else {
                        exit_code::RUN_FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("sweep failed: {e}");
                    exit_code::RUN_FAILURE
                }
            }
        }
        Command::Verify { dir } => match harness::cmd_verify(&dir) {
            Ok(report) => {
                for check in &report.checks {
                    let tag = match check.status {
                        CheckStatus::Pass => "PASS",
                        CheckStatus::Fail => "FAIL",
                        CheckStatus::Skipped => "SKIP",
                    };
                    println!(
                        "[{tag}] {} value={:.6e} tolerance={:.6e} {}",
                        check.name, check.value, check.tolerance, check.detail
                    );
                }
                println!("report written to {}", report.report_path.display());
                if report.all_passed() {
                    exit_code::SUCCESS
                } else {
                    exit_code::VERIFICATION_FAILURE
                }
            }
            Err(e) => {
                eprintln!("verification failed: {e}");
                exit_code::VERIFICATION_FAILURE
            }
        },
    }
}

fn main() {
    std::process::exit(run_main(Cli::parse()));
}
