//! Negative log marginal likelihood of `y ~ N(0, K(θ))` and its gradient.

use nalgebra::{DMatrix, DVector};

use super::{kernel_matrix, Distances, GpHyperparams};
use crate::linalg::Factor;
use crate::{lit, Error, Real, Result};

fn check<T: Real>(y: &DVector<T>, dist: &Distances<T>) -> Result<()> {
    if dist.rows() != y.len() || dist.cols() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for {}x{} distance matrices",
            y.len(),
            dist.rows(),
            dist.cols()
        )));
    }
    Ok(())
}

/// `O(θ) = ½ log|K(θ)| + ½ yᵀ K(θ)⁻¹ y` with `K(θ) = e^{−θ1} I + exp(θ2 − …)`.
pub fn neg_log_likelihood<T: Real>(
    theta: &GpHyperparams<T>,
    y: &DVector<T>,
    dist: &Distances<T>,
) -> Result<T> {
    check(y, dist)?;
    let f = Factor::new(&kernel_matrix(theta, dist, true))?;
    let half: T = lit(0.5);
    Ok(half * f.log_det() + half * y.dot(&f.solve(y)))
}

/// `∂O/∂θ_j = ½ tr[(K⁻¹ − ααᵀ) ∂K/∂θ_j]`, `α = K⁻¹ y`.
pub fn gradient<T: Real>(
    theta: &GpHyperparams<T>,
    y: &DVector<T>,
    dist: &Distances<T>,
) -> Result<[T; 5]> {
    objective_and_gradient(theta, y, dist).map(|(_, g)| g)
}

/// Objective and gradient from a single factorization.
///
/// The factorization may add a diagonal jitter proportional to the mean
/// diagonal `e^{−θ1} + e^{θ2}`; its derivative is included so the gradient
/// is that of the objective actually evaluated.
pub fn objective_and_gradient<T: Real>(
    theta: &GpHyperparams<T>,
    y: &DVector<T>,
    dist: &Distances<T>,
) -> Result<(T, [T; 5])> {
    check(y, dist)?;
    let n = y.len();
    let k = kernel_matrix(theta, dist, true);
    let f = Factor::new(&k)?;
    let half: T = lit(0.5);
    let alpha = f.solve(y);
    let obj = half * f.log_det() + half * y.dot(&alpha);

    let mean_diag = k.diagonal().sum() / lit::<T>(n as f64);
    let rel_jitter = f.jitter() / mean_diag;
    let mut w: DMatrix<T> = f.inverse();
    w -= &alpha * alpha.transpose();
    let trace_w = w.trace();

    let [t1, t2, t3, t4, t5] = theta.theta;
    let noise = (-t1).exp();
    let (pu, pa, pz) = (t3.exp(), t4.exp(), t5.exp());
    let mut s2 = T::zero();
    let mut s3 = T::zero();
    let mut s4 = T::zero();
    let mut s5 = T::zero();
    for j in 0..n {
        for i in 0..n {
            let knl = if i == j {
                t2.exp()
            } else {
                (t2 - pu * dist.eu[(i, j)] - pa * dist.ea[(i, j)] - pz * dist.ez[(i, j)]).exp()
            };
            let wk = w[(i, j)] * knl;
            s2 += wk;
            s3 += wk * dist.eu[(i, j)];
            s4 += wk * dist.ea[(i, j)];
            s5 += wk * dist.ez[(i, j)];
        }
    }
    let g = [
        -half * noise * (T::one() + rel_jitter) * trace_w,
        half * s2 + half * rel_jitter * t2.exp() * trace_w,
        -half * pu * s3,
        -half * pa * s4,
        -half * pz * s5,
    ];
    Ok((obj, g))
}
