//! Batch-size controllers.
//!
//! Four kinds: a constant baseline, the per-sample approximate norm test on
//! one worker's batch, the exact-variance norm test backed by the
//! full-gradient oracle, and the practical cross-worker test that estimates
//! per-sample variance from worker batch gradients alone.
//!
//! All tests share one decision rule: compare the estimated (or exact)
//! batch-gradient deviation against η² times a squared gradient norm, pass
//! at equality, and grow the batch to the ceiling of the ratio when the test
//! fails. Sizes never shrink and never exceed the cap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::FiniteSumProblem;
use crate::vector::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Constant,
    ExactNorm,
    PerSampleNorm,
    CrossWorkerNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    WithReplacement,
    WithoutReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    PerWorker,
    MaxOverWorkers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    /// Test constant in (0,1), shared across workers unless overridden.
    pub eta: f64,
    /// Initial local batch size b0.
    pub initial_batch: usize,
    /// Hard cap on the local batch size.
    pub max_batch: usize,
    pub sampling: SamplingMode,
    pub aggregation: Aggregation,
    /// Optional per-worker test constants for the heterogeneous formulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_per_worker: Option<Vec<f64>>,
    /// Largest pool the exact-variance oracle is willing to sweep.
    pub oracle_limit: usize,
}

impl ControllerConfig {
    pub fn eta_for(&self, worker: usize) -> f64 {
        self.eta_per_worker
            .as_ref()
            .and_then(|v| v.get(worker).copied())
            .unwrap_or(self.eta)
    }

    /// Validate against the per-worker pool size and worker count.
    pub fn validate(&self, pool_size: usize, workers: usize) -> Result<()> {
        let mut etas = vec![self.eta];
        if let Some(per) = &self.eta_per_worker {
            if per.len() != workers {
                return Err(Error::InvalidConfig(format!(
                    "eta_per_worker lists {} values for {} workers",
                    per.len(),
                    workers
                )));
            }
            etas.extend_from_slice(per);
        }
        for eta in etas {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "controller eta must lie strictly between 0 and 1, got {eta}"
                )));
            }
        }
        let min_batch = match self.kind {
            ControllerKind::Constant => 1,
            // Batch variance needs at least two samples; sizes never shrink,
            // so requiring it of b0 keeps every later batch valid too.
            _ => 2,
        };
        if self.initial_batch < min_batch {
            return Err(Error::InvalidConfig(format!(
                "initial batch size {} below the minimum {min_batch} for this controller",
                self.initial_batch
            )));
        }
        if !(self.initial_batch <= self.max_batch && self.max_batch <= pool_size) {
            return Err(Error::InvalidConfig(format!(
                "batch sizes must satisfy b0 <= cap <= pool size, got b0={}, cap={}, pool={}",
                self.initial_batch, self.max_batch, pool_size
            )));
        }
        if self.kind == ControllerKind::CrossWorkerNorm && workers < 2 {
            return Err(Error::InvalidConfig(
                "cross_worker_norm requires at least 2 workers".into(),
            ));
        }
        if self.kind == ControllerKind::ExactNorm && pool_size > self.oracle_limit {
            return Err(Error::InvalidConfig(format!(
                "exact_norm oracle limited to pools of {} samples, got {pool_size}",
                self.oracle_limit
            )));
        }
        Ok(())
    }
}

/// Outcome of one norm test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerDecision {
    pub passed: bool,
    /// The next-size candidate before ceiling: variance over η² times the
    /// squared gradient norm (scaled to a local size where applicable).
    pub statistic: f64,
    pub next_size: usize,
    pub variance_estimate: f64,
    pub gradient_norm_sq: f64,
}

impl ControllerDecision {
    fn unchanged(current: usize, variance: f64, grad_norm_sq: f64) -> Self {
        ControllerDecision {
            passed: true,
            statistic: 0.0,
            next_size: current,
            variance_estimate: variance,
            gradient_norm_sq: grad_norm_sq,
        }
    }
}

fn clamp_next(statistic: f64, current: usize, cap: usize) -> usize {
    let target = if statistic.is_finite() {
        // Float-to-int casts saturate, so huge statistics land on the cap.
        statistic.ceil().max(0.0) as usize
    } else {
        cap
    };
    target.max(current).min(cap)
}

/// Shared decision rule. `variance` is the (estimated) per-sample variance,
/// `worker_scale` is 1 for single-worker tests and M for the cross-worker
/// test, and the statistic is variance / (scale · η² · ‖g‖²) so that the
/// test passes exactly when statistic <= current.
pub fn norm_test_decision(
    variance: f64,
    grad_norm_sq: f64,
    eta: f64,
    worker_scale: f64,
    current: usize,
    cap: usize,
) -> ControllerDecision {
    if grad_norm_sq == 0.0 {
        return if variance == 0.0 {
            // Exact stationary point: nothing to test.
            ControllerDecision::unchanged(current, variance, grad_norm_sq)
        } else {
            // Pure noise regime: the ratio diverges.
            ControllerDecision {
                passed: false,
                statistic: f64::INFINITY,
                next_size: cap,
                variance_estimate: variance,
                gradient_norm_sq: grad_norm_sq,
            }
        };
    }
    let statistic = variance / (worker_scale * eta * eta * grad_norm_sq);
    ControllerDecision {
        passed: statistic <= current as f64,
        statistic,
        next_size: clamp_next(statistic, current, cap),
        variance_estimate: variance,
        gradient_norm_sq: grad_norm_sq,
    }
}

/// Batch variance (1/(b−1)) Σ ‖g_i − mean‖², summed in list order.
pub fn batch_variance(grads: &[ParamVector]) -> Result<f64> {
    if grads.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "batch variance undefined for {} gradient(s)",
            grads.len()
        )));
    }
    let mean = ParamVector::mean(grads);
    let sum_dev: f64 = grads.iter().map(|g| g.dist_sq(&mean)).sum();
    Ok(sum_dev / (grads.len() - 1) as f64)
}

/// Per-sample local norm test on one worker's batch of gradients.
pub fn per_sample_test(
    grads: &[ParamVector],
    eta: f64,
    current: usize,
    cap: usize,
) -> Result<ControllerDecision> {
    if grads.len() != current {
        return Err(Error::InvalidInput(format!(
            "got {} per-sample gradients for batch size {current}",
            grads.len()
        )));
    }
    let variance = batch_variance(grads)?;
    let mean = ParamVector::mean(grads);
    Ok(norm_test_decision(
        variance,
        mean.norm_sq(),
        eta,
        1.0,
        current,
        cap,
    ))
}

/// Exact mean-squared deviation E‖∇F_B − ∇F‖² of a uniformly sampled batch
/// mean, given the population variance of the per-sample gradients.
pub fn exact_batch_deviation(
    variance_pop: f64,
    batch: usize,
    pool: usize,
    mode: SamplingMode,
) -> f64 {
    let b = batch as f64;
    match mode {
        SamplingMode::WithReplacement => variance_pop / b,
        SamplingMode::WithoutReplacement => {
            if pool <= 1 || batch >= pool {
                0.0
            } else {
                variance_pop / b * (pool - batch) as f64 / (pool - 1) as f64
            }
        }
    }
}

/// The literal finite-population estimator δ̂² = (1/b)·Var_B·(n−b)/(n−1)
/// built from one sampled batch. Exposed alongside the exact formula; the
/// two conventions differ and both are available for comparison.
pub fn fpc_deviation_estimate(batch_grads: &[ParamVector], pool: usize) -> Result<f64> {
    let b = batch_grads.len();
    if b > pool {
        return Err(Error::InvalidInput(format!(
            "batch of {b} exceeds pool of {pool}"
        )));
    }
    let var = batch_variance(batch_grads)?;
    if pool <= 1 {
        return Ok(0.0);
    }
    Ok(var / b as f64 * (pool - b) as f64 / (pool - 1) as f64)
}

/// Exact-variance norm test via the full-gradient oracle over `pool`.
///
/// The decision statistic is the smallest real batch size satisfying the
/// exact inequality at `x`; the next size is its ceiling clamped to
/// [current, cap].
pub fn exact_test(
    problem: &FiniteSumProblem,
    pool: &[usize],
    x: &ParamVector,
    eta: f64,
    current: usize,
    cap: usize,
    mode: SamplingMode,
) -> Result<ControllerDecision> {
    let stats = problem.pool_gradient_stats(x, pool)?;
    let grad_norm_sq = stats.mean.norm_sq();
    let sigma_sq = stats.variance_pop;
    let threshold = eta * eta * grad_norm_sq;
    if threshold == 0.0 {
        return Ok(if sigma_sq == 0.0 {
            ControllerDecision::unchanged(current, sigma_sq, grad_norm_sq)
        } else {
            ControllerDecision {
                passed: false,
                statistic: f64::INFINITY,
                next_size: cap,
                variance_estimate: sigma_sq,
                gradient_norm_sq: grad_norm_sq,
            }
        });
    }
    let n = pool.len() as f64;
    let statistic = match mode {
        SamplingMode::WithReplacement => sigma_sq / threshold,
        // (σ²/b)(n−b)/(n−1) <= T  ⇔  b >= σ²n / (T(n−1) + σ²)
        SamplingMode::WithoutReplacement => sigma_sq * n / (threshold * (n - 1.0) + sigma_sq),
    };
    Ok(ControllerDecision {
        passed: statistic <= current as f64,
        statistic,
        next_size: clamp_next(statistic, current, cap),
        variance_estimate: sigma_sq,
        gradient_norm_sq: grad_norm_sq,
    })
}

/// Per-sample-variance estimate built from worker batch gradients:
/// local_b · (1/(M−1)) Σ_m ‖g_m − mean‖².
pub fn cross_worker_variance(worker_grads: &[ParamVector], local_batch: usize) -> Result<f64> {
    let m = worker_grads.len();
    if m < 2 {
        return Err(Error::InvalidConfig(format!(
            "cross-worker variance needs at least 2 workers, got {m}"
        )));
    }
    let mean = ParamVector::mean(worker_grads);
    let sum_dev: f64 = worker_grads.iter().map(|g| g.dist_sq(&mean)).sum();
    Ok(local_batch as f64 * sum_dev / (m - 1) as f64)
}

/// Cross-worker norm test: variance estimate against η²‖mean gradient‖²
/// at the global batch size M·local_b; the resulting size is shared by all
/// workers.
pub fn cross_worker_test(
    worker_grads: &[ParamVector],
    eta: f64,
    current_local: usize,
    cap: usize,
) -> Result<ControllerDecision> {
    let m = worker_grads.len();
    let variance = cross_worker_variance(worker_grads, current_local)?;
    let mean = ParamVector::mean(worker_grads);
    Ok(norm_test_decision(
        variance,
        mean.norm_sq(),
        eta,
        m as f64,
        current_local,
        cap,
    ))
}

/// Round inputs for [`decide`], matching the controller kind.
#[derive(Debug)]
pub enum RoundInputs<'a> {
    Constant {
        current: &'a [usize],
    },
    /// Per-worker per-sample gradients of each worker's latest batch.
    PerSample {
        grads: &'a [Vec<ParamVector>],
        current: &'a [usize],
    },
    /// One batch gradient per worker, all workers at the same local size.
    CrossWorker {
        grads: &'a [ParamVector],
        current_local: usize,
    },
    /// Oracle evaluation points and index pools, one per worker.
    Exact {
        problem: &'a FiniteSumProblem,
        pools: &'a [Vec<usize>],
        points: &'a [ParamVector],
        current: &'a [usize],
    },
}

/// Apply the configured worker aggregation to per-worker decisions.
pub fn apply_aggregation(decisions: &mut [ControllerDecision], aggregation: Aggregation) {
    if aggregation == Aggregation::MaxOverWorkers {
        if let Some(max) = decisions.iter().map(|d| d.next_size).max() {
            for d in decisions.iter_mut() {
                d.next_size = max;
            }
        }
    }
}

/// Dispatch one controller round: returns one decision per worker.
pub fn decide(config: &ControllerConfig, inputs: &RoundInputs) -> Result<Vec<ControllerDecision>> {
    let mut decisions = match (config.kind, inputs) {
        (ControllerKind::Constant, RoundInputs::Constant { current }) => current
            .iter()
            .map(|&b| ControllerDecision::unchanged(b, 0.0, 0.0))
            .collect(),
        (ControllerKind::PerSampleNorm, RoundInputs::PerSample { grads, current }) => {
            if grads.len() != current.len() {
                return Err(Error::InvalidInput(
                    "one gradient batch per worker required".into(),
                ));
            }
            grads
                .iter()
                .zip(current.iter())
                .enumerate()
                .map(|(m, (g, &b))| per_sample_test(g, config.eta_for(m), b, config.max_batch))
                .collect::<Result<Vec<_>>>()?
        }
        (ControllerKind::CrossWorkerNorm, RoundInputs::CrossWorker { grads, current_local }) => {
            let decision =
                cross_worker_test(grads, config.eta, *current_local, config.max_batch)?;
            vec![decision; grads.len()]
        }
        (ControllerKind::ExactNorm, RoundInputs::Exact { problem, pools, points, current }) => {
            if pools.len() != current.len() || points.len() != current.len() {
                return Err(Error::InvalidInput(
                    "one pool, point and size per worker required".into(),
                ));
            }
            pools
                .iter()
                .zip(points.iter())
                .zip(current.iter())
                .enumerate()
                .map(|(m, ((pool, x), &b))| {
                    exact_test(
                        problem,
                        pool,
                        x,
                        config.eta_for(m),
                        b,
                        config.max_batch,
                        config.sampling,
                    )
                })
                .collect::<Result<Vec<_>>>()?
        }
        _ => {
            return Err(Error::InvalidConfig(
                "round inputs do not match the controller kind".into(),
            ))
        }
    };
    apply_aggregation(&mut decisions, config.aggregation);
    Ok(decisions)
}
