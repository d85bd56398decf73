//! Inner-optimizer update rules applied during local steps, plus learning
//! rate schedules keyed on cumulative samples processed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// Per-worker optimizer state. Buffers are zero-initialized and owned by
/// exactly one worker.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Sgd,
    /// Heavy-ball momentum: v ← βv + g, step −αv.
    Shb { momentum: f64, velocity: ParamVector },
    /// Decoupled weight decay applied before the bias-corrected adaptive step.
    AdamW {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        weight_decay: f64,
        first_moment: ParamVector,
        second_moment: ParamVector,
        step_count: u64,
    },
}

impl OptimizerState {
    pub fn sgd() -> Self {
        OptimizerState::Sgd
    }

    pub fn shb(momentum: f64, dim: usize) -> Self {
        OptimizerState::Shb {
            momentum,
            velocity: ParamVector::zeros(dim),
        }
    }

    pub fn adamw(beta1: f64, beta2: f64, epsilon: f64, weight_decay: f64, dim: usize) -> Self {
        OptimizerState::AdamW {
            beta1,
            beta2,
            epsilon,
            weight_decay,
            first_moment: ParamVector::zeros(dim),
            second_moment: ParamVector::zeros(dim),
            step_count: 0,
        }
    }

    /// Reset buffers to the zero-initialized state, keeping hyperparameters.
    pub fn reset(&mut self) {
        match self {
            OptimizerState::Sgd => {}
            OptimizerState::Shb { velocity, .. } => *velocity = ParamVector::zeros(velocity.dim()),
            OptimizerState::AdamW {
                first_moment,
                second_moment,
                step_count,
                ..
            } => {
                *first_moment = ParamVector::zeros(first_moment.dim());
                *second_moment = ParamVector::zeros(second_moment.dim());
                *step_count = 0;
            }
        }
    }

    /// One optimizer step on `x` with gradient `g` and learning rate `alpha`.
    pub fn apply_step(&mut self, x: &mut ParamVector, g: &ParamVector, alpha: f64) -> Result<()> {
        if x.dim() != g.dim() {
            return Err(Error::InvalidInput(format!(
                "parameter dimension {} does not match gradient dimension {}",
                x.dim(),
                g.dim()
            )));
        }
        if !g.is_finite() {
            return Err(Error::Numerical("non-finite gradient".into()));
        }
        match self {
            OptimizerState::Sgd => x.add_scaled(-alpha, g),
            OptimizerState::Shb { momentum, velocity } => {
                velocity.scale(*momentum);
                velocity.add_scaled(1.0, g);
                x.add_scaled(-alpha, velocity);
            }
            OptimizerState::AdamW {
                beta1,
                beta2,
                epsilon,
                weight_decay,
                first_moment,
                second_moment,
                step_count,
            } => {
                x.scale(1.0 - alpha * *weight_decay);
                *step_count += 1;
                let t = *step_count as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for j in 0..x.dim() {
                    let gj = g[j];
                    first_moment.0[j] = *beta1 * first_moment.0[j] + (1.0 - *beta1) * gj;
                    second_moment.0[j] = *beta2 * second_moment.0[j] + (1.0 - *beta2) * gj * gj;
                    let m_hat = first_moment.0[j] / bc1;
                    let v_hat = second_moment.0[j] / bc2;
                    x.0[j] -= alpha * m_hat / (v_hat.sqrt() + *epsilon);
                }
            }
        }
        Ok(())
    }
}

/// Config-level optimizer choice; builds fresh per-worker state.
/// Defaults mirror the common recipes: shb momentum 0.9, adamw
/// betas (0.9, 0.95) with weight decay 0.1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerSpec {
    Sgd,
    Shb { momentum: f64 },
    Adamw {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        weight_decay: f64,
    },
}

impl OptimizerSpec {
    pub fn build(&self, dim: usize) -> OptimizerState {
        match self {
            OptimizerSpec::Sgd => OptimizerState::sgd(),
            OptimizerSpec::Shb { momentum } => OptimizerState::shb(*momentum, dim),
            OptimizerSpec::Adamw {
                beta1,
                beta2,
                epsilon,
                weight_decay,
            } => OptimizerState::adamw(*beta1, *beta2, *epsilon, *weight_decay, dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerSpec::Sgd => Ok(()),
            OptimizerSpec::Shb { momentum } => {
                if !(*momentum >= 0.0 && *momentum < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "shb momentum must lie in [0, 1), got {momentum}"
                    )));
                }
                Ok(())
            }
            OptimizerSpec::Adamw {
                beta1,
                beta2,
                epsilon,
                weight_decay,
            } => {
                for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
                    if !(*b >= 0.0 && *b < 1.0) {
                        return Err(Error::InvalidConfig(format!(
                            "adamw {name} must lie in [0, 1), got {b}"
                        )));
                    }
                }
                if *epsilon <= 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "adamw epsilon must be positive, got {epsilon}"
                    )));
                }
                if *weight_decay < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "adamw weight decay must be nonnegative, got {weight_decay}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Learning rate as a function of cumulative samples processed. Batch sizes
/// vary across runs, so step counts are not comparable; sample counts are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LrSchedule {
    Constant { rate: f64 },
    WarmupCosine {
        peak: f64,
        base: f64,
        warmup_samples: u64,
        total_samples: u64,
    },
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            LrSchedule::Constant { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "constant learning rate must be positive and finite, got {rate}"
                    )));
                }
            }
            LrSchedule::WarmupCosine {
                peak,
                base,
                warmup_samples,
                total_samples,
            } => {
                if !(*base > 0.0 && base <= peak && peak.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "warmup_cosine requires 0 < base <= peak, got base={base}, peak={peak}"
                    )));
                }
                if !(*warmup_samples > 0 && warmup_samples < total_samples) {
                    return Err(Error::InvalidConfig(format!(
                        "warmup_cosine requires 0 < warmup_samples < total_samples, got {warmup_samples} vs {total_samples}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Linear ramp 0 → peak over the warmup budget, then cosine decay from
    /// peak to base; clamps to base past the total budget.
    pub fn lr_at(&self, samples_processed: u64) -> f64 {
        match self {
            LrSchedule::Constant { rate } => *rate,
            LrSchedule::WarmupCosine {
                peak,
                base,
                warmup_samples,
                total_samples,
            } => {
                let s = samples_processed;
                if s < *warmup_samples {
                    peak * s as f64 / *warmup_samples as f64
                } else {
                    let span = (total_samples - warmup_samples) as f64;
                    let progress = ((s - warmup_samples) as f64 / span).clamp(0.0, 1.0);
                    base + 0.5 * (peak - base) * (1.0 + (std::f64::consts::PI * progress).cos())
                }
            }
        }
    }
}

/// Linear learning-rate scaling for constant-batch baselines: the peak is
/// multiplied by batch/base_batch, divided once to keep the ratio exact.
pub fn linear_scaled_peak(base_peak: f64, batch: usize, base_batch: usize) -> f64 {
    base_peak * batch as f64 / base_batch as f64
}
