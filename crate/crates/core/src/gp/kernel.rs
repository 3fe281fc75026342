use nalgebra::DMatrix;

use super::{Distances, GpHyperparams};
use crate::Real;

/// `exp(−ψu E_u − ψa E_a − ψz E_z)` elementwise.
pub fn noiseless_correlation<T: Real>(theta: &GpHyperparams<T>, dist: &Distances<T>) -> DMatrix<T> {
    let (pu, pa, pz) = (theta.psi_u(), theta.psi_a(), theta.psi_z());
    DMatrix::from_fn(dist.rows(), dist.cols(), |i, j| {
        (-(pu * dist.eu[(i, j)]) - pa * dist.ea[(i, j)] - pz * dist.ez[(i, j)]).exp()
    })
}

/// `K = exp(θ2 − e^{θ3} E_u − e^{θ4} E_a − e^{θ5} E_z)`, plus `e^{−θ1} I` when
/// `include_noise` is set. The noiseless diagonal is exactly `ψ1`.
pub fn kernel_matrix<T: Real>(
    theta: &GpHyperparams<T>,
    dist: &Distances<T>,
    include_noise: bool,
) -> DMatrix<T> {
    let [t1, t2, t3, t4, t5] = theta.theta;
    let (pu, pa, pz) = (t3.exp(), t4.exp(), t5.exp());
    let n = dist.rows();
    let mut k = DMatrix::from_fn(n, dist.cols(), |i, j| {
        if i == j && n == dist.cols() {
            t2.exp()
        } else {
            (t2 - pu * dist.eu[(i, j)] - pa * dist.ea[(i, j)] - pz * dist.ez[(i, j)]).exp()
        }
    });
    if include_noise {
        let noise = (-t1).exp();
        for i in 0..n.min(dist.cols()) {
            k[(i, i)] += noise;
        }
    }
    k
}

/// Kernel between test rows and training columns; no noise term.
pub fn cross_kernel<T: Real>(theta: &GpHyperparams<T>, cross: &Distances<T>) -> DMatrix<T> {
    let [_, t2, t3, t4, t5] = theta.theta;
    let (pu, pa, pz) = (t3.exp(), t4.exp(), t5.exp());
    DMatrix::from_fn(cross.rows(), cross.cols(), |i, j| {
        (t2 - pu * cross.eu[(i, j)] - pa * cross.ea[(i, j)] - pz * cross.ez[(i, j)]).exp()
    })
}
