//! Finite-sum objectives with exact per-sample gradients and full-gradient
//! oracles.
//!
//! Two families are provided: least-squares quadratics with an exactly
//! controlled Hessian spectrum (so smoothness and strong-convexity constants
//! are known, not estimated) and binary logistic regression on a seeded
//! Gaussian mixture. Gradients are closed form throughout; no numerical
//! differentiation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::step_stream;
use crate::vector::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    Logistic,
}

/// An n-sample differentiable finite-sum objective F(x) = (1/n) Σ f(x; ξ_i).
#[derive(Debug, Clone)]
pub struct FiniteSumProblem {
    kind: ProblemKind,
    /// Per-sample feature vectors a_i.
    features: Vec<ParamVector>,
    /// Per-sample targets: regression value (quadratic) or label in {-1, +1}
    /// (logistic).
    targets: Vec<f64>,
    smoothness: Option<f64>,
    strong_convexity: Option<f64>,
    minimizer: Option<ParamVector>,
    min_value: Option<f64>,
}

/// Mean gradient and spread of the per-sample gradients over an index pool.
#[derive(Debug, Clone)]
pub struct PoolGradientStats {
    /// Mean per-sample gradient over the pool (the pool's full gradient).
    pub mean: ParamVector,
    /// Population variance: (1/p) Σ ‖∇f_i − mean‖².
    pub variance_pop: f64,
    /// Sample-style variance: (1/(p−1)) Σ ‖∇f_i − mean‖²; NaN for p = 1.
    pub variance_sample: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^t), stable for large |t|.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl FiniteSumProblem {
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn num_samples(&self) -> usize {
        self.features.len()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, |a| a.dim())
    }

    /// Lipschitz-smoothness constant: exact for factory quadratics, an upper
    /// bound max_i ‖a_i‖²/4 for logistic.
    pub fn smoothness(&self) -> Option<f64> {
        self.smoothness
    }

    pub fn strong_convexity(&self) -> Option<f64> {
        self.strong_convexity
    }

    pub fn minimizer(&self) -> Option<&ParamVector> {
        self.minimizer.as_ref()
    }

    pub fn min_value(&self) -> Option<f64> {
        self.min_value
    }

    /// Build a least-squares finite sum whose mean Hessian has smallest
    /// eigenvalue exactly `mu` and largest exactly `l`, by explicit spectrum.
    ///
    /// The minimizer and minimum value are stored; the residual is projected
    /// onto the complement of the feature column space so the normal
    /// equations hold at the stored minimizer exactly.
    pub fn make_quadratic(n: usize, d: usize, mu: f64, l: f64, seed: u64) -> Result<Self> {
        if !(mu > 0.0 && mu <= l) {
            return Err(Error::InvalidConfig(format!(
                "quadratic spectrum requires 0 < mu <= l, got mu={mu}, l={l}"
            )));
        }
        if d < 1 || n < d {
            return Err(Error::InvalidConfig(format!(
                "quadratic requires n >= d >= 1, got n={n}, d={d}"
            )));
        }
        if d == 1 && mu != l {
            return Err(Error::InvalidConfig(
                "d = 1 admits a single eigenvalue; set mu == l".into(),
            ));
        }

        let mut rng = step_stream(seed, u64::MAX, 0, 0);
        let gauss = |rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize| {
            DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
        };

        // Spectrum: linear sweep from mu to l, endpoints exact.
        let eigenvalues: Vec<f64> = (0..d)
            .map(|j| {
                if d == 1 {
                    l
                } else {
                    mu + (l - mu) * j as f64 / (d - 1) as f64
                }
            })
            .collect();

        // Orthogonal eigenbasis and an orthonormal n x d frame.
        let q = gauss(&mut rng, d, d).qr().q();
        let w = gauss(&mut rng, n, d).qr().q();

        // Rows a_i of A = sqrt(n) W Λ^{1/2} Qᵀ give mean Hessian (1/n)AᵀA = QΛQᵀ.
        let sqrt_lambda = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            eigenvalues.iter().map(|v| v.sqrt()),
        ));
        let a = (&w * &sqrt_lambda * q.transpose()) * (n as f64).sqrt();

        let x_star = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        // Residual orthogonal to col(A) = col(W), normalized to rms 1, so
        // grad F(x*) = -(1/n) Aᵀ r = 0 while per-sample gradients stay noisy.
        let mut r = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        r -= &w * (w.transpose() * &r);
        let rms = (r.norm_squared() / n as f64).sqrt();
        if rms > 1e-12 {
            r /= rms;
        }
        let y = &a * &x_star + &r;

        let features = (0..n)
            .map(|i| ParamVector::from_vec(a.row(i).iter().copied().collect()))
            .collect();
        let min_value = r.norm_squared() / (2.0 * n as f64);
        Ok(FiniteSumProblem {
            kind: ProblemKind::Quadratic,
            features,
            targets: y.iter().copied().collect(),
            smoothness: Some(l),
            strong_convexity: Some(mu),
            minimizer: Some(ParamVector::from_vec(x_star.iter().copied().collect())),
            min_value: Some(min_value),
        })
    }

    /// Binary logistic regression on a seeded Gaussian mixture.
    ///
    /// `separation` is the distance between the class means along the first
    /// coordinate; 0 gives fully overlapping classes. The stored smoothness
    /// is the upper bound max_i ‖a_i‖²/4.
    pub fn make_logistic(n: usize, d: usize, separation: f64, seed: u64) -> Result<Self> {
        if n < 2 || d < 1 {
            return Err(Error::InvalidConfig(format!(
                "logistic requires n >= 2 and d >= 1, got n={n}, d={d}"
            )));
        }
        if !separation.is_finite() || separation < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "separation must be finite and >= 0, got {separation}"
            )));
        }
        let mut rng = step_stream(seed, u64::MAX, 1, 0);
        let mut features = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for i in 0..n {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut a: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            a[0] += label * separation / 2.0;
            features.push(ParamVector::from_vec(a));
            targets.push(label);
        }
        let l_bound = features
            .iter()
            .map(|a| a.norm_sq() / 4.0)
            .fold(0.0, f64::max);
        Ok(FiniteSumProblem {
            kind: ProblemKind::Logistic,
            features,
            targets,
            smoothness: Some(l_bound),
            strong_convexity: None,
            minimizer: None,
            min_value: None,
        })
    }

    /// Quadratic finite sum from explicit samples: f_i(x) = ½(a_iᵀx − y_i)².
    /// No analytic constants are attached.
    pub fn quadratic_from_data(features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        Self::from_data(ProblemKind::Quadratic, features, targets)
    }

    /// Logistic finite sum from explicit samples with labels in {-1, +1}.
    pub fn logistic_from_data(features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        for y in &targets {
            if *y != 1.0 && *y != -1.0 {
                return Err(Error::InvalidInput(format!(
                    "logistic labels must be -1 or +1, got {y}"
                )));
            }
        }
        Self::from_data(ProblemKind::Logistic, features, targets)
    }

    fn from_data(kind: ProblemKind, features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidInput("no samples".into()));
        }
        if features.len() != targets.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature rows vs {} targets",
                features.len(),
                targets.len()
            )));
        }
        let d = features[0].len();
        if d == 0 || features.iter().any(|a| a.len() != d) {
            return Err(Error::InvalidInput("inconsistent feature dimensions".into()));
        }
        Ok(FiniteSumProblem {
            kind,
            features: features.into_iter().map(ParamVector::from_vec).collect(),
            targets,
            smoothness: None,
            strong_convexity: None,
            minimizer: None,
            min_value: None,
        })
    }

    pub fn per_sample_loss(&self, x: &ParamVector, i: usize) -> f64 {
        let a = &self.features[i];
        let y = self.targets[i];
        match self.kind {
            ProblemKind::Quadratic => {
                let r = a.dot(x) - y;
                0.5 * r * r
            }
            ProblemKind::Logistic => softplus(-y * a.dot(x)),
        }
    }

    /// Exact gradient of f(x; ξ_i), closed form.
    pub fn per_sample_gradient(&self, x: &ParamVector, i: usize) -> Result<ParamVector> {
        if i >= self.num_samples() {
            return Err(Error::InvalidInput(format!(
                "sample index {i} out of range for n={}",
                self.num_samples()
            )));
        }
        if x.dim() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "point dimension {} does not match problem dimension {}",
                x.dim(),
                self.dim()
            )));
        }
        let a = &self.features[i];
        let y = self.targets[i];
        let coeff = match self.kind {
            ProblemKind::Quadratic => a.dot(x) - y,
            ProblemKind::Logistic => -y * sigmoid(-y * a.dot(x)),
        };
        let mut g = a.clone();
        g.scale(coeff);
        Ok(g)
    }

    /// F(x): mean per-sample loss, ascending-index summation.
    pub fn loss(&self, x: &ParamVector) -> f64 {
        let n = self.num_samples();
        (0..n).map(|i| self.per_sample_loss(x, i)).sum::<f64>() / n as f64
    }

    /// ∇F(x): mean per-sample gradient, ascending-index summation.
    pub fn full_gradient(&self, x: &ParamVector) -> Result<ParamVector> {
        let all: Vec<usize> = (0..self.num_samples()).collect();
        self.batch_gradient(x, &all)
    }

    /// Mean per-sample gradient over a batch (multiset of indices).
    /// Summation runs in ascending index order regardless of input order.
    pub fn batch_gradient(&self, x: &ParamVector, batch: &[usize]) -> Result<ParamVector> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let mut sorted = batch.to_vec();
        sorted.sort_unstable();
        let mut acc = ParamVector::zeros(self.dim());
        for &i in &sorted {
            let g = self.per_sample_gradient(x, i)?;
            acc.add_scaled(1.0, &g);
        }
        acc.scale(1.0 / batch.len() as f64);
        Ok(acc)
    }

    /// Mean loss over an index pool (a worker's shard, or the whole set).
    pub fn pool_loss(&self, x: &ParamVector, pool: &[usize]) -> f64 {
        pool.iter()
            .map(|&i| self.per_sample_loss(x, i))
            .sum::<f64>()
            / pool.len() as f64
    }

    /// Mean gradient and per-sample gradient spread over an index pool.
    pub fn pool_gradient_stats(&self, x: &ParamVector, pool: &[usize]) -> Result<PoolGradientStats> {
        if pool.is_empty() {
            return Err(Error::InvalidInput("empty pool".into()));
        }
        let mean = self.batch_gradient(x, pool)?;
        let mut sorted = pool.to_vec();
        sorted.sort_unstable();
        let mut sum_dev = 0.0;
        for &i in &sorted {
            let g = self.per_sample_gradient(x, i)?;
            sum_dev += g.dist_sq(&mean);
        }
        let p = pool.len() as f64;
        Ok(PoolGradientStats {
            mean,
            variance_pop: sum_dev / p,
            variance_sample: if pool.len() >= 2 {
                sum_dev / (p - 1.0)
            } else {
                f64::NAN
            },
        })
    }

    /// High-accuracy reference minimizer and minimum value.
    ///
    /// Quadratics return the stored minimizer or solve the normal equations;
    /// logistic problems run damped Newton until the gradient norm drops
    /// below `tol`.
    pub fn solve_reference(&self, tol: f64, max_iters: usize) -> Result<(ParamVector, f64)> {
        if let (Some(x), Some(f)) = (&self.minimizer, self.min_value) {
            return Ok((x.clone(), f));
        }
        match self.kind {
            ProblemKind::Quadratic => self.solve_normal_equations(),
            ProblemKind::Logistic => self.solve_newton(tol, max_iters),
        }
    }

    fn solve_normal_equations(&self) -> Result<(ParamVector, f64)> {
        let n = self.num_samples();
        let d = self.dim();
        let mut h = DMatrix::zeros(d, d);
        let mut b = DVector::zeros(d);
        for (a, &y) in self.features.iter().zip(&self.targets) {
            for r in 0..d {
                b[r] += a[r] * y / n as f64;
                for c in 0..d {
                    h[(r, c)] += a[r] * a[c] / n as f64;
                }
            }
        }
        let x = h
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Numerical("singular mean Hessian".into()))?;
        let x = ParamVector::from_vec(x.iter().copied().collect());
        let f = self.loss(&x);
        Ok((x, f))
    }

    fn solve_newton(&self, tol: f64, max_iters: usize) -> Result<(ParamVector, f64)> {
        let n = self.num_samples();
        let d = self.dim();
        let mut x = ParamVector::zeros(d);
        for _ in 0..max_iters {
            let grad = self.full_gradient(&x)?;
            if grad.norm() <= tol {
                return Ok((x.clone(), self.loss(&x)));
            }
            let mut h = DMatrix::zeros(d, d);
            for (a, &y) in self.features.iter().zip(&self.targets) {
                let s = sigmoid(-y * a.dot(&x));
                let w = s * (1.0 - s) / n as f64;
                for r in 0..d {
                    for c in 0..d {
                        h[(r, c)] += w * a[r] * a[c];
                    }
                }
            }
            // Tiny ridge keeps the solve well posed on near-separable data.
            for r in 0..d {
                h[(r, r)] += 1e-12;
            }
            let g = DVector::from_iterator(d, grad.as_slice().iter().copied());
            let step = h
                .lu()
                .solve(&g)
                .ok_or_else(|| Error::Numerical("singular Hessian in Newton solve".into()))?;
            let f0 = self.loss(&x);
            let mut t = 1.0;
            loop {
                let mut cand = x.clone();
                cand.add_scaled(-t, &ParamVector::from_vec(step.iter().copied().collect()));
                if self.loss(&cand) <= f0 || t < 1e-8 {
                    x = cand;
                    break;
                }
                t *= 0.5;
            }
        }
        let grad = self.full_gradient(&x)?;
        if grad.norm() <= tol {
            Ok((x.clone(), self.loss(&x)))
        } else {
            Err(Error::Numerical(format!(
                "reference solve did not reach tolerance {tol}; final gradient norm {}",
                grad.norm()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_036() -> FiniteSumProblem {
        // 1-D quadratic with per-sample gradients {0, 3, 6} at x = 1.
        FiniteSumProblem::quadratic_from_data(
            vec![vec![1.0], vec![1.0], vec![1.0]],
            vec![1.0, -2.0, -5.0],
        )
        .unwrap()
    }

    #[test]
    fn per_sample_gradient_quadratic_hand_example() {
        // f(x) = ½(a·x − y)², a = (1,0), y = 0, x = (2,0) → gradient (2,0)
        let p =
            FiniteSumProblem::quadratic_from_data(vec![vec![1.0, 0.0]], vec![0.0]).unwrap();
        let g = p
            .per_sample_gradient(&ParamVector::from_vec(vec![2.0, 0.0]), 0)
            .unwrap();
        assert_eq!(g.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn per_sample_gradient_zero_at_interpolating_minimizer() {
        // y_i = a_i·x* for all i → all per-sample gradients vanish at x*.
        let x_star = vec![0.5, -1.5];
        let features = vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 4.0]];
        let targets: Vec<f64> = features
            .iter()
            .map(|a| a[0] * x_star[0] + a[1] * x_star[1])
            .collect();
        let p = FiniteSumProblem::quadratic_from_data(features, targets).unwrap();
        let xs = ParamVector::from_vec(x_star);
        for i in 0..3 {
            assert!(p.per_sample_gradient(&xs, i).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn per_sample_gradient_logistic_hand_example() {
        // f(x) = ln(1+exp(−y a·x)), a = (1,0), y = +1, x = 0 → (−0.5, 0)
        let p =
            FiniteSumProblem::logistic_from_data(vec![vec![1.0, 0.0]], vec![1.0]).unwrap();
        let g = p
            .per_sample_gradient(&ParamVector::zeros(2), 0)
            .unwrap();
        assert!((g[0] + 0.5).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn per_sample_gradient_index_out_of_range() {
        let p = toy_036();
        assert!(matches!(
            p.per_sample_gradient(&ParamVector::from_vec(vec![1.0]), 3),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn full_gradient_is_mean_of_per_sample() {
        let p = toy_036();
        let x = ParamVector::from_vec(vec![1.0]);
        let g = p.full_gradient(&x).unwrap();
        assert_eq!(g[0], 3.0);
    }

    #[test]
    fn full_gradient_identity_hessian() {
        // Mean Hessian = I and Σ a_i y_i = 0 → ∇F(x) = x.
        let p = FiniteSumProblem::quadratic_from_data(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            vec![0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        // mean Hessian = (1/4)(2 e1e1ᵀ + 2 e2e2ᵀ) = I/2; scale features by √2.
        let s = 2f64.sqrt();
        let p2 = FiniteSumProblem::quadratic_from_data(
            vec![vec![s, 0.0], vec![0.0, s], vec![-s, 0.0], vec![0.0, -s]],
            vec![0.0; 4],
        )
        .unwrap();
        drop(p);
        let x = ParamVector::from_vec(vec![3.0, -1.0]);
        let g = p2.full_gradient(&x).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-14);
        assert!((g[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn full_gradient_single_sample_degenerate() {
        let p =
            FiniteSumProblem::quadratic_from_data(vec![vec![2.0]], vec![1.0]).unwrap();
        let x = ParamVector::from_vec(vec![3.0]);
        assert_eq!(
            p.full_gradient(&x).unwrap().as_slice(),
            p.per_sample_gradient(&x, 0).unwrap().as_slice()
        );
    }

    #[test]
    fn batch_gradient_cases() {
        let p = toy_036();
        let x = ParamVector::from_vec(vec![1.0]);
        // Full index set equals the full gradient.
        let full = p.batch_gradient(&x, &[0, 1, 2]).unwrap();
        assert_eq!(full[0], p.full_gradient(&x).unwrap()[0]);
        // Batch {first, third} → (0+6)/2 = 3.
        assert_eq!(p.batch_gradient(&x, &[0, 2]).unwrap()[0], 3.0);
        // With-replacement duplicate equals that sample's gradient.
        assert_eq!(p.batch_gradient(&x, &[1, 1]).unwrap()[0], 3.0);
        // Empty batch rejected.
        assert!(p.batch_gradient(&x, &[]).is_err());
    }

    #[test]
    fn make_quadratic_isotropic_case() {
        let p = FiniteSumProblem::make_quadratic(4, 2, 1.0, 1.0, 3).unwrap();
        let x_star = p.minimizer().unwrap().clone();
        let x = ParamVector::from_vec(vec![x_star[0] + 2.0, x_star[1] - 0.5]);
        // Mean Hessian = I → ∇F(x) = x − x*.
        let g = p.full_gradient(&x).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-10);
        assert!((g[1] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn make_quadratic_rejects_bad_config() {
        assert!(FiniteSumProblem::make_quadratic(10, 3, 2.0, 1.0, 0).is_err());
        assert!(FiniteSumProblem::make_quadratic(2, 3, 0.5, 1.0, 0).is_err());
        assert!(FiniteSumProblem::make_quadratic(10, 1, 0.5, 1.0, 0).is_err());
    }

    #[test]
    fn make_quadratic_deterministic() {
        let a = FiniteSumProblem::make_quadratic(50, 4, 0.1, 1.0, 9).unwrap();
        let b = FiniteSumProblem::make_quadratic(50, 4, 0.1, 1.0, 9).unwrap();
        for i in 0..50 {
            assert_eq!(a.features[i].as_slice(), b.features[i].as_slice());
            assert_eq!(a.targets[i], b.targets[i]);
        }
        assert_eq!(
            a.minimizer().unwrap().as_slice(),
            b.minimizer().unwrap().as_slice()
        );
    }

    #[test]
    fn make_quadratic_gradient_vanishes_at_minimizer() {
        let p = FiniteSumProblem::make_quadratic(100, 6, 0.2, 2.0, 11).unwrap();
        let g = p.full_gradient(p.minimizer().unwrap()).unwrap();
        assert!(g.norm() < 1e-10, "grad norm at x* = {}", g.norm());
        assert!((p.loss(p.minimizer().unwrap()) - p.min_value().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn make_quadratic_minimum_spot_check() {
        let p = FiniteSumProblem::make_quadratic(60, 5, 0.3, 1.5, 21).unwrap();
        let f_star = p.min_value().unwrap();
        let mut rng = crate::rng::step_stream(77, 0, 0, 0);
        for _ in 0..50 {
            let x = ParamVector::from_vec(
                (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            );
            assert!(p.loss(&x) >= f_star - 1e-12);
        }
    }

    #[test]
    fn make_logistic_full_gradient_all_positive_labels() {
        // All labels +1 at x = 0 → ∇F(0) = −(1/2n) Σ a_i.
        let base = FiniteSumProblem::make_logistic(8, 3, 0.0, 5).unwrap();
        let features: Vec<Vec<f64>> =
            base.features.iter().map(|a| a.as_slice().to_vec()).collect();
        let p = FiniteSumProblem::logistic_from_data(features.clone(), vec![1.0; 8]).unwrap();
        let g = p.full_gradient(&ParamVector::zeros(3)).unwrap();
        for j in 0..3 {
            let expect: f64 = -features.iter().map(|a| a[j]).sum::<f64>() / 16.0;
            assert!((g[j] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn make_logistic_zero_point_loss_and_determinism() {
        let p = FiniteSumProblem::make_logistic(64, 4, 0.0, 13).unwrap();
        assert!((p.loss(&ParamVector::zeros(4)) - 2f64.ln()).abs() < 1e-14);
        let q = FiniteSumProblem::make_logistic(64, 4, 0.0, 13).unwrap();
        for i in 0..64 {
            assert_eq!(p.features[i].as_slice(), q.features[i].as_slice());
            assert_eq!(p.targets[i], q.targets[i]);
        }
    }

    #[test]
    fn pool_stats_on_toy() {
        let p = toy_036();
        let stats = p
            .pool_gradient_stats(&ParamVector::from_vec(vec![1.0]), &[0, 1, 2])
            .unwrap();
        assert_eq!(stats.mean[0], 3.0);
        assert!((stats.variance_pop - 6.0).abs() < 1e-14);
        assert!((stats.variance_sample - 9.0).abs() < 1e-14);
    }

    #[test]
    fn reference_solve_logistic_reaches_stationarity() {
        let p = FiniteSumProblem::make_logistic(128, 3, 0.5, 2).unwrap();
        let (x, f) = p.solve_reference(1e-12, 200).unwrap();
        assert!(p.full_gradient(&x).unwrap().norm() <= 1e-12);
        assert!(f < 2f64.ln());
    }
}
