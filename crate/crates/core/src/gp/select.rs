//! Node selection: each node's latent-scale row enters `E_u` only when its
//! indicator `β_j` is on, with `β_j ~ Bernoulli(π*)` and `π* ~ Beta(a_π, b_π)`.
//!
//! `‖U_i − U_i'‖²_F` is a sum over node rows, so `E_u(β) = Σ_j β_j D_j` with
//! `D_j(i, i') = ‖u_ij − u_i'j‖²`; the per-node blocks are computed once.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::gibbs::{check_inputs, initial_state, sweep};
use super::{
    cross_distances, log_marginal, sample_phi, Chains, Draw, GibbsConfig, GpHyperparams, Priors,
    Subject,
};
use crate::{lit, to_f64, Error, Real, Result};

/// Per-node squared-distance blocks between row and column subjects.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeDistances<T: Real> {
    blocks: Vec<DMatrix<T>>,
}

impl<T: Real> NodeDistances<T> {
    pub fn new(rows: &[Subject<T>], cols: &[Subject<T>]) -> Result<Self> {
        // validates shapes and pins
        cross_distances(rows, cols)?;
        let p = rows
            .first()
            .or(cols.first())
            .map_or(0, |s| s.embedding.nodes());
        let blocks = (0..p)
            .map(|j| {
                DMatrix::from_fn(rows.len(), cols.len(), |i, k| {
                    let a = rows[i].embedding.scales().row(j);
                    let b = cols[k].embedding.scales().row(j);
                    (a - b).norm_squared()
                })
            })
            .collect();
        Ok(Self { blocks })
    }

    pub fn nodes(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, j: usize) -> &DMatrix<T> {
        &self.blocks[j]
    }

    /// `Σ_j β_j D_j`.
    pub fn combine(&self, beta: &[u8]) -> DMatrix<T> {
        let (r, c) = self.blocks.first().map_or((0, 0), |b| b.shape());
        let mut eu = DMatrix::zeros(r, c);
        for (b, d) in beta.iter().zip(&self.blocks) {
            if *b == 1 {
                eu += d;
            }
        }
        eu
    }
}

/// `π* lik1 / (π* lik1 + (1 − π*) lik0)` from log-likelihoods.
pub fn inclusion_probability(log_lik1: f64, log_lik0: f64, pi_star: f64) -> f64 {
    if pi_star <= 0.0 {
        return 0.0;
    }
    if pi_star >= 1.0 {
        return 1.0;
    }
    let log_odds = (log_lik1 + pi_star.ln()) - (log_lik0 + (1.0 - pi_star).ln());
    if log_odds >= 0.0 {
        1.0 / (1.0 + (-log_odds).exp())
    } else {
        let e = log_odds.exp();
        e / (1.0 + e)
    }
}

/// Draws `β_j` given the two log-likelihoods; returns the draw and its
/// success probability.
pub fn sample_inclusion<R: Rng + ?Sized>(
    log_lik1: f64,
    log_lik0: f64,
    pi_star: f64,
    rng: &mut R,
) -> (u8, f64) {
    let prob = inclusion_probability(log_lik1, log_lik0, pi_star);
    (u8::from(rng.random::<f64>() < prob), prob)
}

fn sample_pi_star<T: Real, R: Rng + ?Sized>(
    beta: &[u8],
    priors: &Priors<T>,
    rng: &mut R,
) -> Result<f64> {
    let on = beta.iter().map(|&b| b as f64).sum::<f64>();
    let p = beta.len() as f64;
    let dist = Beta::new(to_f64(priors.a_pi) + on, to_f64(priors.b_pi) + p - on)
        .map_err(|e| Error::Numerical(format!("invalid beta parameters: {e}")))?;
    Ok(dist.sample(rng))
}

/// Node-selection sampler. Each iteration updates `τ`, `ψ1` and the
/// lengthscales as in [`super::gibbs_sample`], then every `β_j`, then `π*`,
/// and finally `φ`. Starts from `init` with all nodes included and `π*` at
/// its prior mean.
pub fn node_selection_sample<T: Real, R: Rng + ?Sized>(
    y: &DVector<T>,
    subjects: &[Subject<T>],
    priors: &Priors<T>,
    cfg: &GibbsConfig,
    init: &GpHyperparams<T>,
    rng: &mut R,
) -> Result<Chains<T>> {
    let base = cross_distances(subjects, subjects)?;
    check_inputs(y, &base, priors, cfg)?;
    let nodes = NodeDistances::new(subjects, subjects)?;
    let p = nodes.nodes();
    let mut beta = vec![1u8; p];
    let mut pi_star = to_f64(priors.a_pi) / to_f64(priors.a_pi + priors.b_pi);
    let mut dist = base.with_eu(nodes.combine(&beta));
    let mut state = initial_state(init, y, &dist)?;
    let mut accepted = [0usize; 3];
    let mut draws = Vec::with_capacity(cfg.retained());

    // φ is drawn last: β and π* are updated with φ integrated out, so the
    // atoms must be refreshed under the new indicators before anything
    // conditions on them again
    let mut head = cfg.clone();
    head.blocks.phi = false;
    for it in 0..cfg.iterations {
        sweep(&mut state, y, &dist, priors, &head, &mut accepted, rng)?;

        let hp = state.hyperparams();
        let log_lik = |eu: &DMatrix<T>| -> Option<f64> {
            let d = base.with_eu(eu.clone());
            let e0 = super::noiseless_correlation(&hp, &d);
            log_marginal(state.psi1, state.tau, &e0, y).ok().map(to_f64)
        };
        for j in 0..p {
            let without = {
                let mut b = beta.clone();
                b[j] = 0;
                nodes.combine(&b)
            };
            let with = &without + nodes.block(j);
            let (l1, l0) = (log_lik(&with), log_lik(&without));
            beta[j] = match (l1, l0) {
                (Some(l1), Some(l0)) => sample_inclusion(l1, l0, pi_star, rng).0,
                // an unfactorizable alternative is never moved to
                (Some(_), None) => 1,
                (None, Some(_)) => 0,
                (None, None) => {
                    return Err(Error::Numerical(format!(
                        "covariance singular for both states of node {j}"
                    )))
                }
            };
        }
        pi_star = sample_pi_star(&beta, priors, rng)?;
        dist = base.with_eu(nodes.combine(&beta));
        if cfg.blocks.phi {
            state.phi = sample_phi(&state, y, &dist, rng)?;
        }

        if it >= cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
            draws.push(Draw {
                tau: state.tau,
                psi1: state.psi1,
                psi_u: state.psi_u,
                psi_a: state.psi_a,
                psi_z: state.psi_z,
                phi: state.phi.clone(),
                beta: Some(beta.clone()),
                pi_star: Some(lit(pi_star)),
            });
        }
    }
    let total = cfg.iterations as f64;
    Ok(Chains {
        draws,
        acceptance: accepted.map(|a| a as f64 / total),
    })
}
