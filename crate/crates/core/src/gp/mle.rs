//! Maximum-likelihood hyperparameters by gradient descent with an Armijo-style
//! step rule: a step is taken only if it lowers the objective; the learning
//! rate grows by 1.5 after a first-try success and is halved until the
//! objective decreases otherwise.

use nalgebra::{DMatrix, DVector};

use super::{neg_log_likelihood, objective_and_gradient, Distances, GpHyperparams};
use crate::{lit, to_f64, Error, Real, Result};

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MleConfig {
    pub max_iter: usize,
    /// Stop once an accepted step changes the objective by less than this.
    pub tol: f64,
    pub initial_lr: f64,
    /// Give up the line search once the learning rate falls below this.
    pub min_lr: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-8,
            initial_lr: 1.0,
            min_lr: 1e-12,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.tol) || !positive(self.initial_lr) || !positive(self.min_lr) {
            return Err(Error::InvalidArgument(
                "tolerance and learning rates must be positive and finite".into(),
            ));
        }
        if self.min_lr > self.initial_lr {
            return Err(Error::InvalidArgument(
                "minimum learning rate exceeds the initial one".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MleStatus {
    /// An accepted step changed the objective by less than the tolerance.
    Converged,
    MaxIterations,
    /// No decreasing step found above the minimum learning rate; the
    /// returned point is the last accepted one.
    LineSearchUnderflow,
}

#[derive(Clone, Debug)]
pub struct MleFit<T: Real> {
    pub theta: GpHyperparams<T>,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub status: MleStatus,
}

impl<T: Real> MleFit<T> {
    pub fn objective(&self) -> T {
        *self.trace.last().expect("trace is never empty")
    }
}

fn step<T: Real>(theta: &GpHyperparams<T>, grad: &[T; 5], lr: f64) -> GpHyperparams<T> {
    let lr: T = lit(lr);
    GpHyperparams {
        theta: std::array::from_fn(|j| theta.theta[j] - lr * grad[j]),
    }
}

/// Objective at `theta`, with failures and non-finite values mapped to +∞.
fn objective_or_inf<T: Real>(theta: &GpHyperparams<T>, y: &DVector<T>, dist: &Distances<T>) -> f64 {
    if theta.theta.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    match neg_log_likelihood(theta, y, dist) {
        Ok(v) if v.is_finite() => to_f64(v),
        _ => f64::INFINITY,
    }
}

/// Minimizes the negative log marginal likelihood over log-scale hyperparameters.
pub fn fit_mle<T: Real>(
    y: &DVector<T>,
    dist: &Distances<T>,
    init: GpHyperparams<T>,
    cfg: &MleConfig,
) -> Result<MleFit<T>> {
    cfg.validate()?;
    let mut theta = init;
    let (f0, _) = objective_and_gradient(&theta, y, dist)?;
    let mut trace = vec![f0];
    let mut lr = cfg.initial_lr;
    let mut status = MleStatus::MaxIterations;
    let mut iterations = 0;

    for g in 1..=cfg.max_iter {
        iterations = g;
        let (f, df) = objective_and_gradient(&theta, y, dist)?;
        let f = to_f64(f);
        if df.iter().all(|v| *v == T::zero()) {
            status = MleStatus::Converged;
            break;
        }
        let first = objective_or_inf(&step(&theta, &df, lr), y, dist);
        if first < f {
            theta = step(&theta, &df, lr);
            lr *= 1.5;
            trace.push(lit(first));
            if (f - first).abs() < cfg.tol {
                status = MleStatus::Converged;
                break;
            }
            continue;
        }
        let mut accepted = None;
        while lr >= cfg.min_lr {
            lr *= 0.5;
            let cand = objective_or_inf(&step(&theta, &df, lr), y, dist);
            if cand < f {
                accepted = Some(cand);
                break;
            }
        }
        let Some(value) = accepted else {
            log::warn!(
                "line search underflow at iteration {g} (objective {f:.6e}); returning last accepted point"
            );
            status = MleStatus::LineSearchUnderflow;
            break;
        };
        theta = step(&theta, &df, lr);
        trace.push(lit(value));
        if (f - value).abs() < cfg.tol {
            status = MleStatus::Converged;
            break;
        }
    }
    Ok(MleFit {
        theta,
        trace,
        iterations,
        status,
    })
}

fn median_positive<T: Real>(m: &DMatrix<T>) -> Option<f64> {
    let mut v: Vec<f64> = m.iter().map(|&x| to_f64(x)).filter(|x| *x > 0.0).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    Some(v[v.len() / 2])
}

/// Data-scaled starting point: signal and noise each take half the response
/// variance, and each lengthscale is the reciprocal of the median nonzero
/// squared distance in its block (1 when the block is identically zero).
pub fn default_init<T: Real>(y: &DVector<T>, dist: &Distances<T>) -> GpHyperparams<T> {
    let n = y.len() as f64;
    let mean = y.iter().map(|&v| to_f64(v)).sum::<f64>() / n.max(1.0);
    let var = if n > 1.0 {
        y.iter().map(|&v| (to_f64(v) - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        1.0
    };
    let var = if var > 1e-12 { var } else { 1.0 };
    let ls = |m: &DMatrix<T>| median_positive(m).map_or(0.0, |med| -med.ln());
    GpHyperparams {
        theta: [
            lit((2.0 / var).ln()),
            lit((var / 2.0).ln()),
            lit(ls(&dist.eu)),
            lit(ls(&dist.ea)),
            lit(ls(&dist.ez)),
        ],
    }
}
