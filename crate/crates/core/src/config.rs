//! Experiment configuration: a sectioned key-value text format.
//!
//! Grammar: blank lines and `#` comments are ignored; `[section]` opens a
//! section; `key = value` assigns inside it. Sections are `run`, `problem`,
//! `optimizer`, `schedule`, `controller` and `output`. Unknown keys are
//! rejected. Parsing reports every problem at once, each with its key path
//! and line number.
//!
//! Overrides layer on top of the file in order: environment variables
//! (`LOCALBATCH_<SECTION>__<KEY>`), then repeated `--set section.key=value`
//! flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{Aggregation, ControllerConfig, ControllerKind, SamplingMode};
use crate::engine::{AlgorithmVariant, DataAssignment, RunConfig};
use crate::error::{Error, Result};
use crate::optimizers::{LrSchedule, OptimizerSpec};
use crate::problems::FiniteSumProblem;

pub const ENV_PREFIX: &str = "LOCALBATCH_";

/// One configuration problem: key path, optional source line, message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigIssue {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProblemSpec {
    Quadratic { n: usize, d: usize, mu: f64, l: f64, seed: u64 },
    Logistic { n: usize, d: usize, separation: f64, seed: u64 },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<FiniteSumProblem> {
        match *self {
            ProblemSpec::Quadratic { n, d, mu, l, seed } => {
                FiniteSumProblem::make_quadratic(n, d, mu, l, seed)
            }
            ProblemSpec::Logistic { n, d, separation, seed } => {
                FiniteSumProblem::make_logistic(n, d, separation, seed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub metrics_file: String,
    pub summary_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub engine: RunConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    File(usize),
    Env,
    Flag,
}

#[derive(Debug, Clone)]
struct SourceValue {
    value: String,
    origin: Origin,
}

/// Raw parsed key-value entries keyed by (section, key).
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<(String, String), SourceValue>,
}

impl RawConfig {
    /// Parse the sectioned key-value text, collecting syntax errors.
    pub fn parse(text: &str) -> (RawConfig, Vec<ConfigIssue>) {
        let mut raw = RawConfig::default();
        let mut issues = Vec::new();
        let mut section: Option<String> = None;
        for (idx, line_raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match line_raw.find('#') {
                Some(pos) => &line_raw[..pos],
                None => line_raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                match name.strip_suffix(']') {
                    Some(name) if !name.trim().is_empty() => {
                        section = Some(name.trim().to_string());
                    }
                    _ => issues.push(ConfigIssue {
                        key: line.to_string(),
                        line: Some(line_no),
                        message: "malformed section header".into(),
                    }),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                issues.push(ConfigIssue {
                    key: line.to_string(),
                    line: Some(line_no),
                    message: "expected `key = value`".into(),
                });
                continue;
            };
            let Some(section) = section.clone() else {
                issues.push(ConfigIssue {
                    key: key.trim().to_string(),
                    line: Some(line_no),
                    message: "key appears before any [section] header".into(),
                });
                continue;
            };
            raw.entries.insert(
                (section, key.trim().to_string()),
                SourceValue {
                    value: value.trim().to_string(),
                    origin: Origin::File(line_no),
                },
            );
        }
        (raw, issues)
    }

    /// Apply `LOCALBATCH_<SECTION>__<KEY>` environment overrides.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) {
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let Some((section, key)) = rest.split_once("__") else {
                continue;
            };
            self.entries.insert(
                (section.to_lowercase(), key.to_lowercase()),
                SourceValue { value, origin: Origin::Env },
            );
        }
    }

    /// Apply one `section.key=value` override.
    pub fn apply_set(&mut self, spec: &str) -> std::result::Result<(), ConfigIssue> {
        let Some((path, value)) = spec.split_once('=') else {
            return Err(ConfigIssue {
                key: spec.to_string(),
                line: None,
                message: "override must look like section.key=value".into(),
            });
        };
        let Some((section, key)) = path.trim().split_once('.') else {
            return Err(ConfigIssue {
                key: path.trim().to_string(),
                line: None,
                message: "override key must be section.key".into(),
            });
        };
        self.entries.insert(
            (section.trim().to_string(), key.trim().to_string()),
            SourceValue {
                value: value.trim().to_string(),
                origin: Origin::Flag,
            },
        );
        Ok(())
    }
}

/// Typed extraction with an error accumulator; every touched key is marked
/// so leftovers can be rejected as unknown.
struct Extractor {
    raw: RawConfig,
    used: std::collections::BTreeSet<(String, String)>,
    issues: Vec<ConfigIssue>,
}

impl Extractor {
    fn new(raw: RawConfig, issues: Vec<ConfigIssue>) -> Self {
        Extractor {
            raw,
            used: Default::default(),
            issues,
        }
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        match self
            .raw
            .entries
            .get(&(section.to_string(), key.to_string()))
            .map(|v| v.origin)
        {
            Some(Origin::File(line)) => Some(line),
            _ => None,
        }
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, Option<usize>)> {
        let id = (section.to_string(), key.to_string());
        self.used.insert(id.clone());
        self.raw.entries.get(&id).map(|v| {
            let line = match v.origin {
                Origin::File(l) => Some(l),
                _ => None,
            };
            (v.value.clone(), line)
        })
    }

    fn issue(&mut self, section: &str, key: &str, message: String) {
        self.issues.push(ConfigIssue {
            key: format!("{section}.{key}"),
            line: self.line_of(section, key),
            message,
        });
    }

    fn parse_with<T, F>(&mut self, section: &str, key: &str, default: Option<T>, f: F) -> Option<T>
    where
        F: Fn(&str) -> std::result::Result<T, String>,
    {
        match self.take(section, key) {
            Some((value, line)) => match f(&value) {
                Ok(v) => Some(v),
                Err(msg) => {
                    self.issues.push(ConfigIssue {
                        key: format!("{section}.{key}"),
                        line,
                        message: format!("{msg} (got `{value}`)"),
                    });
                    None
                }
            },
            None => {
                if default.is_none() {
                    self.issue(section, key, "missing required key".into());
                }
                default
            }
        }
    }

    fn get_u64(&mut self, section: &str, key: &str, default: Option<u64>) -> Option<u64> {
        self.parse_with(section, key, default, |v| {
            v.parse::<u64>().map_err(|_| "expected an unsigned integer".into())
        })
    }

    fn get_usize(&mut self, section: &str, key: &str, default: Option<usize>) -> Option<usize> {
        self.parse_with(section, key, default, |v| {
            v.parse::<usize>().map_err(|_| "expected an unsigned integer".into())
        })
    }

    fn get_f64(&mut self, section: &str, key: &str, default: Option<f64>) -> Option<f64> {
        self.parse_with(section, key, default, |v| {
            v.parse::<f64>().map_err(|_| "expected a real number".into())
        })
    }

    fn get_bool(&mut self, section: &str, key: &str, default: Option<bool>) -> Option<bool> {
        self.parse_with(section, key, default, |v| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err("expected true or false".into()),
        })
    }

    fn get_enum<T: Copy>(
        &mut self,
        section: &str,
        key: &str,
        choices: &[(&str, T)],
        default: Option<T>,
    ) -> Option<T> {
        let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
        self.parse_with(section, key, default, |v| {
            choices
                .iter()
                .find(|(n, _)| *n == v)
                .map(|(_, t)| *t)
                .ok_or_else(|| format!("expected one of {}", names.join(", ")))
        })
    }

    fn reject_unknown(&mut self) {
        let leftovers: Vec<((String, String), Option<usize>)> = self
            .raw
            .entries
            .iter()
            .filter(|(id, _)| !self.used.contains(*id))
            .map(|(id, v)| {
                let line = match v.origin {
                    Origin::File(l) => Some(l),
                    _ => None,
                };
                (id.clone(), line)
            })
            .collect();
        for ((section, key), line) in leftovers {
            self.issues.push(ConfigIssue {
                key: format!("{section}.{key}"),
                line,
                message: "unknown or inapplicable key".into(),
            });
        }
    }
}

impl ExperimentConfig {
    /// Parse and fully validate; on failure, every issue is reported.
    pub fn parse_str(text: &str) -> std::result::Result<ExperimentConfig, Vec<ConfigIssue>> {
        let (raw, issues) = RawConfig::parse(text);
        Self::from_raw(raw, issues)
    }

    pub fn from_file(path: &Path) -> std::result::Result<ExperimentConfig, Vec<ConfigIssue>> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::parse_str(&text),
            Err(e) => Err(vec![ConfigIssue {
                key: path.display().to_string(),
                line: None,
                message: format!("cannot read config file: {e}"),
            }]),
        }
    }

    /// Typed extraction from raw entries plus any pre-existing issues.
    pub fn from_raw(
        raw: RawConfig,
        issues: Vec<ConfigIssue>,
    ) -> std::result::Result<ExperimentConfig, Vec<ConfigIssue>> {
        let mut ex = Extractor::new(raw, issues);

        // [run]
        let workers = ex.get_usize("run", "workers", Some(4));
        let local_steps = ex.get_usize("run", "local_steps", Some(4));
        let budget = ex.get_u64("run", "budget", None);
        let seed = ex.get_u64("run", "seed", Some(1));
        let variant = ex.get_enum(
            "run",
            "variant",
            &[
                ("implemented", AlgorithmVariant::Implemented),
                ("per_sample", AlgorithmVariant::PerSample),
            ],
            Some(AlgorithmVariant::Implemented),
        );
        let assignment = ex.get_enum(
            "run",
            "assignment",
            &[
                ("shared", DataAssignment::Shared),
                ("sharded", DataAssignment::Sharded),
            ],
            Some(DataAssignment::Shared),
        );
        let parallel = ex.get_bool("run", "parallel", Some(false));
        let snapshots = ex.get_bool("run", "snapshots", Some(true));
        let reset_optimizer = ex.get_bool("run", "reset_optimizer", Some(false));
        let max_rounds = match ex.take("run", "max_rounds") {
            Some((v, line)) => match v.parse::<u64>() {
                Ok(n) if n > 0 => Some(Some(n)),
                _ => {
                    ex.issues.push(ConfigIssue {
                        key: "run.max_rounds".into(),
                        line,
                        message: format!("expected a positive integer (got `{v}`)"),
                    });
                    None
                }
            },
            None => Some(None),
        };

        // [problem]
        #[derive(Clone, Copy, PartialEq)]
        enum PK {
            Quadratic,
            Logistic,
        }
        let pkind = ex.get_enum(
            "problem",
            "kind",
            &[("quadratic", PK::Quadratic), ("logistic", PK::Logistic)],
            Some(PK::Quadratic),
        );
        let problem_seed = ex.get_u64("problem", "seed", Some(1));
        let problem = match pkind {
            Some(PK::Quadratic) => {
                let n = ex.get_usize("problem", "n", Some(1000));
                let d = ex.get_usize("problem", "d", Some(10));
                let mu = ex.get_f64("problem", "mu", Some(0.1));
                let l = ex.get_f64("problem", "l", Some(1.0));
                match (n, d, mu, l, problem_seed) {
                    (Some(n), Some(d), Some(mu), Some(l), Some(seed)) => {
                        Some(ProblemSpec::Quadratic { n, d, mu, l, seed })
                    }
                    _ => None,
                }
            }
            Some(PK::Logistic) => {
                let n = ex.get_usize("problem", "n", Some(2048));
                let d = ex.get_usize("problem", "d", Some(10));
                let separation = ex.get_f64("problem", "separation", Some(1.0));
                match (n, d, separation, problem_seed) {
                    (Some(n), Some(d), Some(separation), Some(seed)) => {
                        Some(ProblemSpec::Logistic { n, d, separation, seed })
                    }
                    _ => None,
                }
            }
            None => None,
        };

        // [controller]
        let ckind = ex.get_enum(
            "controller",
            "kind",
            &[
                ("constant", ControllerKind::Constant),
                ("exact_norm", ControllerKind::ExactNorm),
                ("per_sample_norm", ControllerKind::PerSampleNorm),
                ("cross_worker_norm", ControllerKind::CrossWorkerNorm),
            ],
            Some(ControllerKind::CrossWorkerNorm),
        );
        let eta = ex.get_f64("controller", "eta", Some(0.9));
        if let Some(eta) = eta {
            if !(eta > 0.0 && eta < 1.0) {
                ex.issue(
                    "controller",
                    "eta",
                    format!("must lie strictly between 0 and 1, got {eta}"),
                );
            }
        }
        let initial_batch = ex.get_usize("controller", "initial_batch", Some(8));
        let max_batch = match ex.take("controller", "max_batch") {
            Some((v, line)) => match v.parse::<usize>() {
                Ok(n) => Some(Some(n)),
                Err(_) => {
                    ex.issues.push(ConfigIssue {
                        key: "controller.max_batch".into(),
                        line,
                        message: format!("expected an unsigned integer (got `{v}`)"),
                    });
                    None
                }
            },
            // Defaults to the per-worker dataset size, resolved below.
            None => Some(None),
        };
        let sampling = ex.get_enum(
            "controller",
            "sampling",
            &[
                ("without_replacement", SamplingMode::WithoutReplacement),
                ("with_replacement", SamplingMode::WithReplacement),
            ],
            Some(SamplingMode::WithoutReplacement),
        );
        let aggregation = ex.get_enum(
            "controller",
            "aggregation",
            &[
                ("per_worker", Aggregation::PerWorker),
                ("max_over_workers", Aggregation::MaxOverWorkers),
            ],
            Some(Aggregation::MaxOverWorkers),
        );
        let oracle_limit = ex.get_usize("controller", "oracle_limit", Some(200_000));
        let eta_per_worker = match ex.take("controller", "eta_per_worker") {
            Some((v, line)) => {
                let parsed: std::result::Result<Vec<f64>, _> =
                    v.split(',').map(|s| s.trim().parse::<f64>()).collect();
                match parsed {
                    Ok(list) if !list.is_empty() => Some(Some(list)),
                    _ => {
                        ex.issues.push(ConfigIssue {
                            key: "controller.eta_per_worker".into(),
                            line,
                            message: format!("expected a comma-separated list of reals (got `{v}`)"),
                        });
                        None
                    }
                }
            }
            None => Some(None),
        };

        // [optimizer]
        #[derive(Clone, Copy, PartialEq)]
        enum OK_ {
            Sgd,
            Shb,
            Adamw,
        }
        let okind = ex.get_enum(
            "optimizer",
            "kind",
            &[("sgd", OK_::Sgd), ("shb", OK_::Shb), ("adamw", OK_::Adamw)],
            Some(OK_::Sgd),
        );
        let optimizer = match okind {
            Some(OK_::Sgd) => Some(OptimizerSpec::Sgd),
            Some(OK_::Shb) => ex
                .get_f64("optimizer", "momentum", Some(0.9))
                .map(|momentum| OptimizerSpec::Shb { momentum }),
            Some(OK_::Adamw) => {
                let beta1 = ex.get_f64("optimizer", "beta1", Some(0.9));
                let beta2 = ex.get_f64("optimizer", "beta2", Some(0.95));
                let epsilon = ex.get_f64("optimizer", "epsilon", Some(1e-8));
                let weight_decay = ex.get_f64("optimizer", "weight_decay", Some(0.1));
                match (beta1, beta2, epsilon, weight_decay) {
                    (Some(beta1), Some(beta2), Some(epsilon), Some(weight_decay)) => {
                        Some(OptimizerSpec::Adamw { beta1, beta2, epsilon, weight_decay })
                    }
                    _ => None,
                }
            }
            None => None,
        };
        let clip_norm = match ex.take("optimizer", "clip_norm") {
            Some((v, line)) => match v.parse::<f64>() {
                Ok(c) if c > 0.0 => Some(Some(c)),
                _ => {
                    ex.issues.push(ConfigIssue {
                        key: "optimizer.clip_norm".into(),
                        line,
                        message: format!("expected a positive real (got `{v}`)"),
                    });
                    None
                }
            },
            None => Some(None),
        };

        // [schedule]
        #[derive(Clone, Copy, PartialEq)]
        enum SK {
            Constant,
            WarmupCosine,
        }
        let skind = ex.get_enum(
            "schedule",
            "kind",
            &[("constant", SK::Constant), ("warmup_cosine", SK::WarmupCosine)],
            Some(SK::Constant),
        );
        // The default constant rate is the convergence-analysis step size
        // 1/(10 L (H M + eta^2)); it needs the problem's L, so it resolves
        // after the problem spec builds.
        let rate_key = ex.take("schedule", "rate");
        let schedule = match skind {
            Some(SK::Constant) => {
                let rate = match &rate_key {
                    Some((v, line)) => match v.parse::<f64>() {
                        Ok(r) => Some(Some(r)),
                        Err(_) => {
                            ex.issues.push(ConfigIssue {
                                key: "schedule.rate".into(),
                                line: *line,
                                message: format!("expected a real number (got `{v}`)"),
                            });
                            None
                        }
                    },
                    None => Some(None),
                };
                rate.map(|r| (SK::Constant, r, None))
            }
            Some(SK::WarmupCosine) => {
                let peak = ex.get_f64("schedule", "peak", None);
                let base = peak.and_then(|p| ex.get_f64("schedule", "base", Some(p / 10.0)));
                let total = ex.get_u64("schedule", "total_samples", budget);
                let warmup = total
                    .and_then(|t| ex.get_u64("schedule", "warmup_samples", Some(t / 10)));
                match (peak, base, warmup, total) {
                    (Some(peak), Some(base), Some(warmup), Some(total)) => Some((
                        SK::WarmupCosine,
                        None,
                        Some(LrSchedule::WarmupCosine {
                            peak,
                            base,
                            warmup_samples: warmup,
                            total_samples: total,
                        }),
                    )),
                    _ => None,
                }
            }
            None => None,
        };

        // [output]
        let dir = ex
            .parse_with("output", "dir", Some(PathBuf::from("runs/out")), |v| {
                Ok(PathBuf::from(v))
            });
        let metrics_file = ex
            .parse_with("output", "metrics_file", Some("metrics.csv".to_string()), |v| {
                Ok(v.to_string())
            });
        let summary_file = ex
            .parse_with("output", "summary_file", Some("summary.jsonl".to_string()), |v| {
                Ok(v.to_string())
            });
        let snapshot_cadence = ex.get_u64("output", "snapshot_cadence", Some(1));
        if let Some(0) = snapshot_cadence {
            ex.issue("output", "snapshot_cadence", "must be at least 1".into());
        }

        ex.reject_unknown();

        // Assemble; bail with everything collected so far if any piece is
        // missing.
        let (Some(workers), Some(local_steps), Some(budget), Some(seed)) =
            (workers, local_steps, budget, seed)
        else {
            return Err(ex.issues);
        };
        let (Some(variant), Some(assignment), Some(parallel), Some(snapshots)) =
            (variant, assignment, parallel, snapshots)
        else {
            return Err(ex.issues);
        };
        let (Some(reset_optimizer), Some(max_rounds), Some(problem_spec)) =
            (reset_optimizer, max_rounds, problem)
        else {
            return Err(ex.issues);
        };
        let (Some(ckind), Some(eta), Some(initial_batch), Some(max_batch)) =
            (ckind, eta, initial_batch, max_batch)
        else {
            return Err(ex.issues);
        };
        let (Some(sampling), Some(aggregation), Some(oracle_limit), Some(eta_per_worker)) =
            (sampling, aggregation, oracle_limit, eta_per_worker)
        else {
            return Err(ex.issues);
        };
        let (Some(optimizer), Some(clip_norm), Some(schedule_parts)) =
            (optimizer, clip_norm, schedule)
        else {
            return Err(ex.issues);
        };
        let (Some(dir), Some(metrics_file), Some(summary_file), Some(snapshot_cadence)) =
            (dir, metrics_file, summary_file, snapshot_cadence)
        else {
            return Err(ex.issues);
        };
        if !ex.issues.is_empty() {
            return Err(ex.issues);
        }

        // The problem must build for cross-field validation and for the
        // default learning rate.
        let built = match problem_spec.build() {
            Ok(p) => p,
            Err(e) => {
                ex.issues.push(ConfigIssue {
                    key: "problem".into(),
                    line: None,
                    message: e.to_string(),
                });
                return Err(ex.issues);
            }
        };

        let schedule = match schedule_parts {
            (SK::Constant, Some(rate), _) => LrSchedule::Constant { rate },
            (SK::Constant, None, _) => {
                let l = built.smoothness().unwrap_or(1.0);
                let rate = 1.0
                    / (10.0 * l * (local_steps as f64 * workers as f64 + eta * eta));
                LrSchedule::Constant { rate }
            }
            (SK::WarmupCosine, _, Some(s)) => s,
            _ => unreachable!("schedule parts resolved above"),
        };

        let pool = match assignment {
            DataAssignment::Shared => built.num_samples(),
            DataAssignment::Sharded => built.num_samples() / workers.max(1),
        };
        let engine = RunConfig {
            workers,
            local_steps,
            sample_budget: budget,
            seed,
            variant,
            assignment,
            controller: ControllerConfig {
                kind: ckind,
                eta,
                initial_batch,
                max_batch: max_batch.unwrap_or(pool),
                sampling,
                aggregation,
                eta_per_worker,
                oracle_limit,
            },
            optimizer,
            schedule,
            clip_norm,
            snapshots,
            reset_optimizer_each_round: reset_optimizer,
            max_rounds,
            parallel_workers: parallel,
            snapshot_cadence,
        };
        if let Err(e) = engine.validate(&built) {
            ex.issues.push(ConfigIssue {
                key: "run".into(),
                line: None,
                message: e.to_string(),
            });
        }
        if ex.issues.is_empty() {
            Ok(ExperimentConfig {
                problem: problem_spec,
                engine,
                output: OutputConfig { dir, metrics_file, summary_file },
            })
        } else {
            Err(ex.issues)
        }
    }

    /// Canonical serialization: every field explicit, parse-stable.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let e = &self.engine;
        out.push_str("[run]\n");
        out.push_str(&format!("workers = {}\n", e.workers));
        out.push_str(&format!("local_steps = {}\n", e.local_steps));
        out.push_str(&format!("budget = {}\n", e.sample_budget));
        out.push_str(&format!("seed = {}\n", e.seed));
        out.push_str(&format!(
            "variant = {}\n",
            match e.variant {
                AlgorithmVariant::Implemented => "implemented",
                AlgorithmVariant::PerSample => "per_sample",
            }
        ));
        out.push_str(&format!(
            "assignment = {}\n",
            match e.assignment {
                DataAssignment::Shared => "shared",
                DataAssignment::Sharded => "sharded",
            }
        ));
        out.push_str(&format!("parallel = {}\n", e.parallel_workers));
        out.push_str(&format!("snapshots = {}\n", e.snapshots));
        out.push_str(&format!("reset_optimizer = {}\n", e.reset_optimizer_each_round));
        if let Some(m) = e.max_rounds {
            out.push_str(&format!("max_rounds = {m}\n"));
        }
        out.push_str("\n[problem]\n");
        match &self.problem {
            ProblemSpec::Quadratic { n, d, mu, l, seed } => {
                out.push_str("kind = quadratic\n");
                out.push_str(&format!("n = {n}\nd = {d}\nmu = {mu}\nl = {l}\nseed = {seed}\n"));
            }
            ProblemSpec::Logistic { n, d, separation, seed } => {
                out.push_str("kind = logistic\n");
                out.push_str(&format!(
                    "n = {n}\nd = {d}\nseparation = {separation}\nseed = {seed}\n"
                ));
            }
        }
        out.push_str("\n[optimizer]\n");
        match &e.optimizer {
            OptimizerSpec::Sgd => out.push_str("kind = sgd\n"),
            OptimizerSpec::Shb { momentum } => {
                out.push_str("kind = shb\n");
                out.push_str(&format!("momentum = {momentum}\n"));
            }
            OptimizerSpec::Adamw { beta1, beta2, epsilon, weight_decay } => {
                out.push_str("kind = adamw\n");
                out.push_str(&format!(
                    "beta1 = {beta1}\nbeta2 = {beta2}\nepsilon = {epsilon}\nweight_decay = {weight_decay}\n"
                ));
            }
        }
        if let Some(c) = e.clip_norm {
            out.push_str(&format!("clip_norm = {c}\n"));
        }
        out.push_str("\n[schedule]\n");
        match &e.schedule {
            LrSchedule::Constant { rate } => {
                out.push_str("kind = constant\n");
                out.push_str(&format!("rate = {rate}\n"));
            }
            LrSchedule::WarmupCosine { peak, base, warmup_samples, total_samples } => {
                out.push_str("kind = warmup_cosine\n");
                out.push_str(&format!(
                    "peak = {peak}\nbase = {base}\nwarmup_samples = {warmup_samples}\ntotal_samples = {total_samples}\n"
                ));
            }
        }
        out.push_str("\n[controller]\n");
        let c = &e.controller;
        out.push_str(&format!(
            "kind = {}\n",
            match c.kind {
                ControllerKind::Constant => "constant",
                ControllerKind::ExactNorm => "exact_norm",
                ControllerKind::PerSampleNorm => "per_sample_norm",
                ControllerKind::CrossWorkerNorm => "cross_worker_norm",
            }
        ));
        out.push_str(&format!("eta = {}\n", c.eta));
        out.push_str(&format!("initial_batch = {}\n", c.initial_batch));
        out.push_str(&format!("max_batch = {}\n", c.max_batch));
        out.push_str(&format!(
            "sampling = {}\n",
            match c.sampling {
                SamplingMode::WithoutReplacement => "without_replacement",
                SamplingMode::WithReplacement => "with_replacement",
            }
        ));
        out.push_str(&format!(
            "aggregation = {}\n",
            match c.aggregation {
                Aggregation::PerWorker => "per_worker",
                Aggregation::MaxOverWorkers => "max_over_workers",
            }
        ));
        out.push_str(&format!("oracle_limit = {}\n", c.oracle_limit));
        if let Some(etas) = &c.eta_per_worker {
            let list: Vec<String> = etas.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("eta_per_worker = {}\n", list.join(",")));
        }
        out.push_str("\n[output]\n");
        out.push_str(&format!("dir = {}\n", self.output.dir.display()));
        out.push_str(&format!("metrics_file = {}\n", self.output.metrics_file));
        out.push_str(&format!("summary_file = {}\n", self.output.summary_file));
        out.push_str(&format!("snapshot_cadence = {}\n", e.snapshot_cadence));
        out
    }

    pub fn build_problem(&self) -> Result<FiniteSumProblem> {
        self.problem.build()
    }
}

/// Convert accumulated issues into one printable error.
pub fn issues_to_error(issues: &[ConfigIssue]) -> Error {
    let text: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
    Error::InvalidConfig(text.join("; "))
}
