//! Experiment drivers behind the CLI: run, sweep and verify.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, certify_strong_growth, fit_geometric, fit_sublinear, monte_carlo_identity, FitOptions,
};
use crate::config::{ConfigIssue, ExperimentConfig, ProblemSpec, RawConfig};
use crate::controller::ControllerKind;
use crate::engine::{self, AlgorithmVariant, Termination};
use crate::error::{Error, Result};
use crate::metrics::{
    read_metrics, read_summary, write_metrics, write_report, write_summary, CheckStatus,
    RunSummary, VerifyCheck,
};
use crate::vector::ParamVector;

/// Stable process exit codes.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const RUN_FAILURE: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const VERIFICATION_FAILURE: i32 = 3;
}

/// Load a config file and layer overrides: environment variables first,
/// then repeated `--set` flags, then dedicated flags.
pub fn load_config(
    path: &Path,
    sets: &[String],
    out_dir: Option<&Path>,
    seed: Option<u64>,
) -> std::result::Result<ExperimentConfig, Vec<ConfigIssue>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            return Err(vec![ConfigIssue {
                key: path.display().to_string(),
                line: None,
                message: format!("cannot read config file: {e}"),
            }])
        }
    };
    let (mut raw, issues) = RawConfig::parse(&text);
    raw.apply_env(std::env::vars());
    let mut all_issues = issues;
    for spec in sets {
        if let Err(issue) = raw.apply_set(spec) {
            all_issues.push(issue);
        }
    }
    if let Some(dir) = out_dir {
        let _ = raw.apply_set(&format!("output.dir={}", dir.display()));
    }
    if let Some(seed) = seed {
        let _ = raw.apply_set(&format!("run.seed={seed}"));
    }
    ExperimentConfig::from_raw(raw, all_issues)
}

/// Execute one run and write its metrics file and summary.
pub fn cmd_run(config: &ExperimentConfig) -> Result<RunSummary> {
    std::fs::create_dir_all(&config.output.dir)?;
    let problem = config.build_problem()?;
    let outcome = engine::run(&problem, &config.engine)?;
    write_metrics(
        &config.output.dir.join(&config.output.metrics_file),
        &outcome.records,
    )?;
    let summary = RunSummary {
        config_text: config.to_config_text(),
        final_loss: outcome
            .records
            .last()
            .map(|r| r.loss_avg_iterate)
            .unwrap_or(f64::NAN),
        rounds: outcome.records.len() as u64,
        mean_batch_size: analysis::time_averaged_batch_size(&outcome.records),
        samples_processed: outcome
            .records
            .last()
            .map(|r| r.samples_processed)
            .unwrap_or(0),
        steps_per_worker: outcome.steps_per_worker,
        termination: outcome.termination.clone(),
        comm: outcome.comm,
        wallclock_s: outcome.wallclock_s,
    };
    write_summary(
        &config.output.dir.join(&config.output.summary_file),
        &summary,
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub local_steps: Vec<usize>,
    pub etas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub schedule: String,
    pub local_steps: usize,
    pub seed: u64,
    pub steps: u64,
    pub time_s: f64,
    pub mean_batch_size: f64,
    pub final_loss: f64,
    pub rounds: u64,
    pub status: String,
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub aggregate_path: PathBuf,
}

impl SweepReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.status == "ok")
    }
}

fn format_eta(eta: f64) -> String {
    format!("{eta}")
}

/// Run the Cartesian grid of (H, eta, seed) over the base config. Failures
/// are recorded in the aggregate and the sweep continues.
pub fn cmd_sweep(base: &ExperimentConfig, spec: &SweepSpec) -> Result<SweepReport> {
    if spec.local_steps.is_empty() || spec.seeds.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one local_steps value and one seed".into(),
        ));
    }
    let etas = if spec.etas.is_empty() {
        vec![base.engine.controller.eta]
    } else {
        spec.etas.clone()
    };
    let base_dir = base.output.dir.clone();
    std::fs::create_dir_all(&base_dir)?;
    let mut grid = Vec::new();
    for &h in &spec.local_steps {
        for &eta in &etas {
            for &seed in &spec.seeds {
                grid.push((h, eta, seed));
            }
        }
    }

    let run_cell = |&(h, eta, seed): &(usize, f64, u64)| -> SweepRow {
        let mut cfg = base.clone();
        cfg.engine.local_steps = h;
        cfg.engine.controller.eta = eta;
        cfg.engine.seed = seed;
        cfg.output.dir = base_dir.join(format!("H{h}_eta{}_seed{seed}", format_eta(eta)));
        let schedule = match cfg.engine.controller.kind {
            ControllerKind::Constant => "constant".to_string(),
            _ => format!("eta={}", format_eta(eta)),
        };
        let dir = cfg.output.dir.display().to_string();
        let problem = match cfg.build_problem().and_then(|p| {
            cfg.engine.validate(&p)?;
            Ok(p)
        }) {
            Ok(p) => p,
            Err(e) => {
                return SweepRow {
                    schedule,
                    local_steps: h,
                    seed,
                    steps: 0,
                    time_s: f64::NAN,
                    mean_batch_size: f64::NAN,
                    final_loss: f64::NAN,
                    rounds: 0,
                    status: format!("config_error: {e}"),
                    dir,
                }
            }
        };
        drop(problem);
        match cmd_run(&cfg) {
            Ok(summary) => SweepRow {
                schedule,
                local_steps: h,
                seed,
                steps: summary.steps_per_worker,
                time_s: summary.wallclock_s,
                mean_batch_size: summary.mean_batch_size,
                final_loss: summary.final_loss,
                rounds: summary.rounds,
                status: match summary.termination {
                    Termination::Diverged { .. } => "diverged".to_string(),
                    _ => "ok".to_string(),
                },
                dir,
            },
            Err(e) => SweepRow {
                schedule,
                local_steps: h,
                seed,
                steps: 0,
                time_s: f64::NAN,
                mean_batch_size: f64::NAN,
                final_loss: f64::NAN,
                rounds: 0,
                status: format!("error: {e}"),
                dir,
            },
        }
    };

    let rows: Vec<SweepRow> = if spec.parallel {
        grid.par_iter().map(run_cell).collect()
    } else {
        grid.iter().map(run_cell).collect()
    };

    let aggregate_path = base_dir.join("aggregate.csv");
    let mut writer = csv::Writer::from_path(&aggregate_path)?;
    writer.write_record([
        "schedule",
        "h",
        "seed",
        "steps",
        "time_s",
        "mean_batch_size",
        "final_loss",
        "rounds",
        "status",
        "dir",
    ])?;
    for r in &rows {
        writer.write_record([
            r.schedule.clone(),
            r.local_steps.to_string(),
            r.seed.to_string(),
            r.steps.to_string(),
            format!("{:.3}", r.time_s),
            format!("{:.1}", r.mean_batch_size),
            format!("{:.6e}", r.final_loss),
            r.rounds.to_string(),
            r.status.clone(),
            r.dir.clone(),
        ])?;
    }
    writer.flush()?;
    Ok(SweepReport { rows, aggregate_path })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<VerifyCheck>,
    pub report_path: PathBuf,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }
}

/// Verify one run directory or a directory of run directories; writes the
/// line-delimited report next to the metrics.
pub fn cmd_verify(dir: &Path) -> Result<VerifyReport> {
    let mut run_dirs = Vec::new();
    if dir.join("summary.jsonl").exists() {
        run_dirs.push(dir.to_path_buf());
    } else if dir.is_dir() {
        let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.join("summary.jsonl").exists())
            .collect();
        subdirs.sort();
        run_dirs.extend(subdirs);
    }
    if run_dirs.is_empty() {
        return Err(Error::Schema(format!(
            "{}: no run summaries found to verify",
            dir.display()
        )));
    }
    let multi = run_dirs.len() > 1;
    let mut checks = Vec::new();
    for run_dir in &run_dirs {
        let prefix = if multi {
            format!(
                "{}/",
                run_dir.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
            )
        } else {
            String::new()
        };
        checks.extend(verify_run(run_dir, &prefix));
    }
    let report_path = dir.join("verify_report.jsonl");
    write_report(&report_path, &checks)?;
    Ok(VerifyReport { checks, report_path })
}

fn verify_run(run_dir: &Path, prefix: &str) -> Vec<VerifyCheck> {
    let name = |s: &str| format!("{prefix}{s}");
    let mut checks = Vec::new();
    let summary = match read_summary(&run_dir.join("summary.jsonl")) {
        Ok(s) => s,
        Err(e) => {
            checks.push(VerifyCheck::fail(
                &name("summary_readable"),
                f64::NAN,
                0.0,
                e.to_string(),
            ));
            return checks;
        }
    };
    let config = match ExperimentConfig::parse_str(&summary.config_text) {
        Ok(c) => c,
        Err(issues) => {
            checks.push(VerifyCheck::fail(
                &name("config_echo_parses"),
                issues.len() as f64,
                0.0,
                issues
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            ));
            return checks;
        }
    };
    let records = match read_metrics(&run_dir.join(&config.output.metrics_file)) {
        Ok(r) => r,
        Err(e) => {
            checks.push(VerifyCheck::fail(
                &name("metrics_schema"),
                f64::NAN,
                0.0,
                e.to_string(),
            ));
            return checks;
        }
    };
    checks.push(VerifyCheck::pass(
        &name("metrics_schema"),
        0.0,
        0.0,
        format!("{} rows", records.len()),
    ));

    // Batch sizes never shrink and never exceed the cap.
    let cap = config.engine.controller.max_batch;
    let mut violations = 0usize;
    for pair in records.windows(2) {
        if pair[1].local_batch_size < pair[0].local_batch_size {
            violations += 1;
        }
    }
    violations += records.iter().filter(|r| r.local_batch_size > cap).count();
    checks.push(VerifyCheck::gate(
        &name("batch_monotone_capped"),
        violations as f64,
        0.0,
        format!("cap {cap}"),
    ));

    // Sample accounting: strictly increasing, and the budget is reached by
    // exactly the last round.
    let mut acct_violations = 0usize;
    for pair in records.windows(2) {
        if pair[1].samples_processed <= pair[0].samples_processed {
            acct_violations += 1;
        }
    }
    if matches!(summary.termination, Termination::BudgetReached) {
        let n = config.engine.sample_budget;
        if let Some(last) = records.last() {
            if last.samples_processed < n {
                acct_violations += 1;
            }
        }
        if records.len() >= 2 && records[records.len() - 2].samples_processed >= n {
            acct_violations += 1;
        }
    }
    checks.push(VerifyCheck::gate(
        &name("budget_accounting"),
        acct_violations as f64,
        0.0,
        format!("budget {}", config.engine.sample_budget),
    ));

    let diverged = matches!(summary.termination, Termination::Diverged { .. });

    // Strong growth for exact-variance runs: re-simulate (runs are
    // deterministic) and certify every recorded iterate.
    if config.engine.controller.kind == ControllerKind::ExactNorm {
        if diverged {
            checks.push(VerifyCheck::skipped(
                &name("strong_growth"),
                "run diverged".into(),
            ));
        } else if config.engine.variant != AlgorithmVariant::Implemented {
            checks.push(VerifyCheck::skipped(
                &name("strong_growth"),
                "per-step sizes of the per-sample variant are not recorded per round".into(),
            ));
        } else {
            checks.push(strong_growth_check(&name("strong_growth"), &config));
        }
    } else {
        checks.push(VerifyCheck::skipped(
            &name("strong_growth"),
            format!("controller kind is {:?}", config.engine.controller.kind),
        ));
    }

    // Cross-worker variance identity, Monte Carlo at the initial point.
    if config.engine.controller.kind == ControllerKind::CrossWorkerNorm {
        checks.push(identity_check(&name("variance_identity_mc"), &config));
    } else {
        checks.push(VerifyCheck::skipped(
            &name("variance_identity_mc"),
            format!("controller kind is {:?}", config.engine.controller.kind),
        ));
    }

    // Rate checks keyed on the problem class.
    if diverged {
        checks.push(VerifyCheck::skipped(&name("rate"), "run diverged".into()));
    } else {
        match &config.problem {
            ProblemSpec::Quadratic { .. } => {
                checks.push(rate_check_geometric(&name("rate_geometric"), &config, &records));
            }
            ProblemSpec::Logistic { .. } => {
                checks.push(rate_check_sublinear(&name("rate_sublinear"), &config, &records));
            }
        }
    }
    checks
}

fn strong_growth_check(name: &str, config: &ExperimentConfig) -> VerifyCheck {
    let problem = match config.build_problem() {
        Ok(p) => p,
        Err(e) => return VerifyCheck::fail(name, f64::NAN, 0.0, e.to_string()),
    };
    let mut engine_config = config.engine.clone();
    engine_config.snapshots = true;
    engine_config.snapshot_cadence = 1;
    let outcome = match engine::run(&problem, &engine_config) {
        Ok(o) => o,
        Err(e) => return VerifyCheck::fail(name, f64::NAN, 0.0, e.to_string()),
    };
    let trace = match outcome.snapshots.as_ref() {
        Some(t) => t,
        None => return VerifyCheck::fail(name, f64::NAN, 0.0, "no snapshots".into()),
    };
    let rounds = outcome.batch_size_history.len() as u64;
    let mut iterates = Vec::new();
    let mut sizes = Vec::new();
    for (round, params) in &trace.entries {
        if *round < rounds {
            match engine::all_reduce_average(params) {
                Ok(x) => iterates.push(x),
                Err(e) => return VerifyCheck::fail(name, f64::NAN, 0.0, e.to_string()),
            }
            sizes.push(outcome.batch_size_history[*round as usize][0]);
        }
    }
    let eta = config.engine.controller.eta;
    match certify_strong_growth(
        &problem,
        &iterates,
        &sizes,
        eta,
        config.engine.controller.sampling,
    ) {
        Ok(report) => {
            let tolerance = eta * eta + 1e-12;
            VerifyCheck::gate(
                name,
                report.max_ratio,
                tolerance,
                format!(
                    "checked {} iterates, {} zero-gradient",
                    report.checked,
                    report.zero_gradient_rounds.len()
                ),
            )
        }
        Err(e) => VerifyCheck::fail(name, f64::NAN, 0.0, e.to_string()),
    }
}

fn identity_check(name: &str, config: &ExperimentConfig) -> VerifyCheck {
    let problem = match config.build_problem() {
        Ok(p) => p,
        Err(e) => return VerifyCheck::fail(name, f64::NAN, 0.0, e.to_string()),
    };
    let x0 = ParamVector::zeros(problem.dim());
    match monte_carlo_identity(
        &problem,
        &x0,
        1,
        config.engine.workers,
        10_000,
        config.engine.seed,
    ) {
        Ok(report) => VerifyCheck::gate(
            name,
            report.relative_error,
            0.05,
            format!("target {:.6e} over {} trials", report.target, report.trials),
        ),
        Err(e) => VerifyCheck::skipped(name, e.to_string()),
    }
}

/// Window options for fitting a decaying loss curve from metrics: skip the
/// first tenth, stop at the larger of the float-noise floor and twice the
/// best suboptimality seen (a stochastic plateau).
fn fit_options(subopt: &[f64], f_star: f64) -> FitOptions {
    let positive_min = subopt
        .iter()
        .copied()
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    FitOptions {
        skip_rounds: subopt.len() / 10,
        noise_floor: (1e3 * f64::EPSILON * f_star.abs()).max(2.0 * positive_min),
    }
}

fn rate_check_geometric(
    name: &str,
    config: &ExperimentConfig,
    records: &[crate::engine::RunRecord],
) -> VerifyCheck {
    if records.len() < 15 {
        return VerifyCheck::skipped(name, format!("only {} rounds", records.len()));
    }
    let problem = match config.build_problem() {
        Ok(p) => p,
        Err(e) => return VerifyCheck::fail(name, f64::NAN, 0.0, e.to_string()),
    };
    let f_star = match problem.min_value() {
        Some(f) => f,
        None => return VerifyCheck::skipped(name, "no analytic minimum".into()),
    };
    let subopt: Vec<f64> = records.iter().map(|r| r.loss_avg_iterate - f_star).collect();
    match fit_geometric(&subopt, &fit_options(&subopt, f_star)) {
        Ok(fit) => {
            let ok = fit.rate < 0.0 && fit.r_squared >= 0.9;
            let detail = format!(
                "slope {:.4e}, R^2 {:.4}, window [{}, {})",
                fit.rate, fit.r_squared, fit.window.0, fit.window.1
            );
            if ok {
                VerifyCheck::pass(name, fit.r_squared, 0.9, detail)
            } else {
                VerifyCheck::fail(name, fit.r_squared, 0.9, detail)
            }
        }
        Err(e) => VerifyCheck::skipped(name, e.to_string()),
    }
}

fn rate_check_sublinear(
    name: &str,
    config: &ExperimentConfig,
    records: &[crate::engine::RunRecord],
) -> VerifyCheck {
    if records.len() < 30 {
        return VerifyCheck::skipped(name, format!("only {} rounds", records.len()));
    }
    let problem = match config.build_problem() {
        Ok(p) => p,
        Err(e) => return VerifyCheck::fail(name, f64::NAN, 0.0, e.to_string()),
    };
    let (_, f_star) = match problem.solve_reference(1e-12, 400) {
        Ok(v) => v,
        Err(e) => return VerifyCheck::skipped(name, format!("no reference solution: {e}")),
    };
    let subopt: Vec<f64> = records.iter().map(|r| r.loss_avg_iterate - f_star).collect();
    match fit_sublinear(&subopt, &fit_options(&subopt, f_star)) {
        Ok(fit) => {
            let ok = fit.rate <= -0.5 && fit.r_squared >= 0.8;
            let detail = format!(
                "slope {:.4}, R^2 {:.4}, window [{}, {})",
                fit.rate, fit.r_squared, fit.window.0, fit.window.1
            );
            if ok {
                VerifyCheck::pass(name, fit.rate, -0.5, detail)
            } else {
                VerifyCheck::fail(name, fit.rate, -0.5, detail)
            }
        }
        Err(e) => VerifyCheck::skipped(name, e.to_string()),
    }
}
