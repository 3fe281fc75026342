//! Out-of-sample prediction with 95% intervals.
//!
//! With point estimates the predictive distribution is Gaussian with mean
//! `K*(K + τ⁻¹I)⁻¹y` and variance `ψ1 + τ⁻¹ − k*ᵀ(K + τ⁻¹I)⁻¹k*`. With posterior
//! draws each draw contributes `K*K⁻¹φ + N(0, τ⁻¹)`, and the interval is the
//! empirical 2.5–97.5% range.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    cross_distances, cross_kernel, kernel_matrix, Distances, Draw, FitMode, GpHyperparams, GpModel,
    NodeDistances, Subject,
};
use crate::linalg::Factor;
use crate::{lit, to_f64, Error, Real, Result};

const Z_975: f64 = 1.959_963_984_540_054;

/// Per-test-subject predictive mean and 95% interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T: Real> {
    pub mean: DVector<T>,
    pub lower: DVector<T>,
    pub upper: DVector<T>,
}

impl<T: Real> Prediction<T> {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

fn check_cross<T: Real>(y_len: usize, train: &Distances<T>, cross: &Distances<T>) -> Result<()> {
    if train.rows() != y_len || train.cols() != y_len || cross.cols() != y_len {
        return Err(Error::DimensionMismatch(format!(
            "{} training responses, {}x{} training and {}x{} cross distances",
            y_len,
            train.rows(),
            train.cols(),
            cross.rows(),
            cross.cols()
        )));
    }
    Ok(())
}

/// Gaussian predictive mean and interval at fixed hyperparameters.
pub fn predict_mle<T: Real>(
    theta: &GpHyperparams<T>,
    y: &DVector<T>,
    train: &Distances<T>,
    cross: &Distances<T>,
) -> Result<Prediction<T>> {
    check_cross(y.len(), train, cross)?;
    let f = Factor::new(&kernel_matrix(theta, train, true))?;
    let ks = cross_kernel(theta, cross);
    let mean = &ks * f.solve(y);
    let prior_var = theta.psi1() + T::one() / theta.tau();
    let v = f.solve_lower(&ks.transpose());
    let z: T = lit(Z_975);
    let sd = DVector::from_fn(ks.nrows(), |i, _| {
        let explained = v.column(i).norm_squared();
        (prior_var - explained).max(T::zero()).sqrt()
    });
    Ok(Prediction {
        lower: &mean - &sd * z,
        upper: &mean + &sd * z,
        mean,
    })
}

/// Linear-interpolation sample quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Predictive summaries from posterior draws.
///
/// When the draws carry node indicators, `nodes` must supply the per-node
/// training and cross distance blocks so `E_u` can be rebuilt per draw.
pub fn predict_mcmc<T: Real, R: Rng + ?Sized>(
    draws: &[Draw<T>],
    train: &Distances<T>,
    cross: &Distances<T>,
    nodes: Option<(&NodeDistances<T>, &NodeDistances<T>)>,
    rng: &mut R,
) -> Result<Prediction<T>> {
    let Some(first) = draws.first() else {
        return Err(Error::InvalidArgument("no posterior draws".into()));
    };
    check_cross(first.phi.len(), train, cross)?;
    let m = cross.rows();
    let mut samples = vec![Vec::with_capacity(draws.len()); m];
    for draw in draws {
        let hp = draw.hyperparams();
        let (tr, cr) = match (&draw.beta, nodes) {
            (Some(beta), Some((nt, nc))) => (
                std::borrow::Cow::Owned(train.with_eu(nt.combine(beta))),
                std::borrow::Cow::Owned(cross.with_eu(nc.combine(beta))),
            ),
            (Some(_), None) => {
                return Err(Error::InvalidArgument(
                    "draws carry node indicators but no per-node distances were given".into(),
                ))
            }
            _ => (
                std::borrow::Cow::Borrowed(train),
                std::borrow::Cow::Borrowed(cross),
            ),
        };
        let f = Factor::new(&kernel_matrix(&hp, &tr, false))?;
        let cond = cross_kernel(&hp, &cr) * f.solve(&draw.phi);
        let noise_sd = to_f64(T::one() / draw.tau).sqrt();
        for (i, s) in samples.iter_mut().enumerate() {
            let eps: f64 = StandardNormal.sample(rng);
            s.push(to_f64(cond[i]) + noise_sd * eps);
        }
    }
    let mut mean = DVector::zeros(m);
    let mut lower = DVector::zeros(m);
    let mut upper = DVector::zeros(m);
    for (i, mut s) in samples.into_iter().enumerate() {
        mean[i] = lit(s.iter().sum::<f64>() / s.len() as f64);
        s.sort_by(|a, b| a.total_cmp(b));
        lower[i] = lit(quantile(&s, 0.025));
        upper[i] = lit(quantile(&s, 0.975));
    }
    Ok(Prediction { mean, lower, upper })
}

/// Predicts for `test` subjects with the model's fitting mode. The RNG is
/// only drawn from in MCMC mode.
pub fn predict<T: Real, R: Rng + ?Sized>(
    model: &GpModel<T>,
    test: &[Subject<T>],
    rng: &mut R,
) -> Result<Prediction<T>> {
    let train = &model.training;
    if let (Some(t), Some(s)) = (test.first(), train.subjects.first()) {
        // surface config mismatches before any algebra
        cross_distances(std::slice::from_ref(t), std::slice::from_ref(s))?;
    }
    let cross = cross_distances(test, &train.subjects)?;
    match (model.mode, &model.chains) {
        (FitMode::Mle, _) | (FitMode::Mcmc, None) => {
            predict_mle(&model.theta_hat, &train.y, &train.dist, &cross)
        }
        (FitMode::Mcmc, Some(chains)) => {
            let selected = chains.draws.first().is_some_and(|d| d.beta.is_some());
            if selected {
                let nt = NodeDistances::new(&train.subjects, &train.subjects)?;
                let nc = NodeDistances::new(test, &train.subjects)?;
                predict_mcmc(&chains.draws, &train.dist, &cross, Some((&nt, &nc)), rng)
            } else {
                predict_mcmc(&chains.draws, &train.dist, &cross, None, rng)
            }
        }
    }
}
