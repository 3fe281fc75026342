//! Metropolis-within-Gibbs sampler for `(τ, ψ1, ψu, ψa, ψz, φ)`.
//!
//! One sweep updates, in order:
//! 1. `τ ~ Gamma(a_τ + n/2, rate = b_τ + ½‖y − φ‖²)`;
//! 2. `ψ1 ~ InvGamma(a_ψ1 + n/2, b_ψ1 + ½ φᵀ E₀⁻¹ φ)`,
//!    `E₀ = exp(−ψu E_u − ψa E_a − ψz E_z)`;
//! 3. each of `ψu, ψa, ψz` by a log-normal random walk, accepted with the
//!    ratio of marginal likelihoods `N(y | 0, ψ1 E₀ + τ⁻¹ I)`;
//! 4. `φ ~ N([τ⁻¹ψ1⁻¹E₀⁻¹ + I]⁻¹ y, [ψ1⁻¹E₀⁻¹ + τ I]⁻¹)`.
//!
//! The walk is symmetric in `log ψ`, so no proposal correction enters step 3.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};

use super::{noiseless_correlation, Distances, GpHyperparams};
use crate::linalg::{gaussian_log_kernel, Factor};
use crate::{lit, to_f64, Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Priors<T: Real> {
    pub a_tau: T,
    pub b_tau: T,
    pub a_psi1: T,
    pub b_psi1: T,
    pub a_pi: T,
    pub b_pi: T,
}

impl<T: Real> Default for Priors<T> {
    fn default() -> Self {
        Self {
            a_tau: T::one(),
            b_tau: T::one(),
            a_psi1: T::one(),
            b_psi1: T::one(),
            a_pi: T::one(),
            b_pi: T::one(),
        }
    }
}

impl<T: Real> Priors<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a_tau,
            self.b_tau,
            self.a_psi1,
            self.b_psi1,
            self.a_pi,
            self.b_pi,
        ];
        if all.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "prior parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Which sweep steps run; disabling a block freezes it at its current value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GibbsBlocks {
    pub tau: bool,
    pub psi1: bool,
    pub lengthscales: bool,
    pub phi: bool,
}

impl Default for GibbsBlocks {
    fn default() -> Self {
        Self {
            tau: true,
            psi1: true,
            lengthscales: true,
            phi: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    /// Standard deviation of the random walk on `log ψ`.
    pub proposal_sd: f64,
    pub thin: usize,
    pub blocks: GibbsBlocks,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            burn_in: 500,
            proposal_sd: 0.01,
            thin: 1,
            blocks: GibbsBlocks::default(),
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::InvalidArgument(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thinning must be at least 1".into()));
        }
        if !(self.proposal_sd >= 0.0) || !self.proposal_sd.is_finite() {
            return Err(Error::InvalidArgument(
                "proposal sd must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Number of draws kept after burn-in and thinning.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// Current values of the sampled quantities, on the natural scale.
#[derive(Clone, Debug, PartialEq)]
pub struct GibbsState<T: Real> {
    pub tau: T,
    pub psi1: T,
    pub psi_u: T,
    pub psi_a: T,
    pub psi_z: T,
    /// GP atoms at the training inputs.
    pub phi: DVector<T>,
}

impl<T: Real> GibbsState<T> {
    pub fn hyperparams(&self) -> GpHyperparams<T> {
        GpHyperparams {
            theta: [self.tau, self.psi1, self.psi_u, self.psi_a, self.psi_z].map(|v| v.ln()),
        }
    }

    /// `E₀` at the current lengthscales.
    pub fn correlation(&self, dist: &Distances<T>) -> DMatrix<T> {
        noiseless_correlation(&self.hyperparams(), dist)
    }
}

/// One retained posterior draw.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw<T: Real> {
    pub tau: T,
    pub psi1: T,
    pub psi_u: T,
    pub psi_a: T,
    pub psi_z: T,
    pub phi: DVector<T>,
    /// Node indicators, when node selection is active.
    pub beta: Option<Vec<u8>>,
    pub pi_star: Option<T>,
}

impl<T: Real> Draw<T> {
    pub fn hyperparams(&self) -> GpHyperparams<T> {
        GpHyperparams {
            theta: [self.tau, self.psi1, self.psi_u, self.psi_a, self.psi_z].map(|v| v.ln()),
        }
    }

    fn from_state(s: &GibbsState<T>) -> Self {
        Self {
            tau: s.tau,
            psi1: s.psi1,
            psi_u: s.psi_u,
            psi_a: s.psi_a,
            psi_z: s.psi_z,
            phi: s.phi.clone(),
            beta: None,
            pi_star: None,
        }
    }
}

/// Retained draws plus sampler diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Chains<T: Real> {
    pub draws: Vec<Draw<T>>,
    /// Metropolis acceptance rates for `(ψu, ψa, ψz)` over all iterations.
    pub acceptance: [f64; 3],
}

impl<T: Real> Chains<T> {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Fraction of retained draws with `β_j = 1`, per node.
    pub fn inclusion_probabilities(&self) -> Option<Vec<f64>> {
        let first = self.draws.first()?.beta.as_ref()?;
        let mut counts = vec![0usize; first.len()];
        for d in &self.draws {
            for (c, &b) in counts.iter_mut().zip(d.beta.as_ref()?) {
                *c += b as usize;
            }
        }
        let m = self.draws.len() as f64;
        Some(counts.into_iter().map(|c| c as f64 / m).collect())
    }
}

/// The lengthscale updated by a Metropolis step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lengthscale {
    U,
    A,
    Z,
}

impl Lengthscale {
    pub const ALL: [Lengthscale; 3] = [Lengthscale::U, Lengthscale::A, Lengthscale::Z];

    fn get<T: Real>(self, s: &GibbsState<T>) -> T {
        match self {
            Lengthscale::U => s.psi_u,
            Lengthscale::A => s.psi_a,
            Lengthscale::Z => s.psi_z,
        }
    }

    fn set<T: Real>(self, s: &mut GibbsState<T>, v: T) {
        match self {
            Lengthscale::U => s.psi_u = v,
            Lengthscale::A => s.psi_a = v,
            Lengthscale::Z => s.psi_z = v,
        }
    }
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| {
        Error::Numerical(format!("invalid gamma parameters ({shape}, {rate}): {e}"))
    })?;
    Ok(g.sample(rng))
}

/// Step 1: conjugate Gamma draw of the noise precision.
pub fn sample_tau<T: Real, R: Rng + ?Sized>(
    state: &GibbsState<T>,
    y: &DVector<T>,
    priors: &Priors<T>,
    rng: &mut R,
) -> Result<T> {
    let n = y.len() as f64;
    let resid = to_f64((y - &state.phi).norm_squared());
    let shape = to_f64(priors.a_tau) + 0.5 * n;
    let rate = to_f64(priors.b_tau) + 0.5 * resid;
    gamma_draw(shape, rate, rng).map(lit)
}

/// Step 2: conjugate inverse-Gamma draw of the kernel scale.
pub fn sample_psi1<T: Real, R: Rng + ?Sized>(
    state: &GibbsState<T>,
    dist: &Distances<T>,
    priors: &Priors<T>,
    rng: &mut R,
) -> Result<T> {
    let n = state.phi.len() as f64;
    let e0 = Factor::new(&state.correlation(dist))?;
    let quad = to_f64(state.phi.dot(&e0.solve(&state.phi)));
    let shape = to_f64(priors.a_psi1) + 0.5 * n;
    let rate = to_f64(priors.b_psi1) + 0.5 * quad;
    gamma_draw(shape, rate, rng).map(|g| lit(1.0 / g))
}

/// `log N(y | 0, ψ1 E₀ + τ⁻¹ I)` up to the `2π` constant.
pub fn log_marginal<T: Real>(psi1: T, tau: T, e0: &DMatrix<T>, y: &DVector<T>) -> Result<T> {
    let mut c = e0 * psi1;
    let noise = T::one() / tau;
    for i in 0..c.nrows() {
        c[(i, i)] += noise;
    }
    gaussian_log_kernel(&c, y)
}

/// Step 3 for one lengthscale. Returns whether the proposal was accepted.
/// A proposal whose covariance cannot be factorized is rejected.
pub fn mh_lengthscale_step<T: Real, R: Rng + ?Sized>(
    which: Lengthscale,
    state: &mut GibbsState<T>,
    y: &DVector<T>,
    dist: &Distances<T>,
    proposal_sd: f64,
    rng: &mut R,
) -> Result<bool> {
    let current = which.get(state);
    let walk = Normal::new(0.0, proposal_sd)
        .map_err(|e| Error::InvalidArgument(format!("proposal sd: {e}")))?;
    let candidate: T = (current.ln() + lit(walk.sample(rng))).exp();
    let log_u = rng.random::<f64>().ln();
    let cur_lm = log_marginal(state.psi1, state.tau, &state.correlation(dist), y)?;
    let mut proposed = state.clone();
    which.set(&mut proposed, candidate);
    let Ok(cand_lm) = log_marginal(state.psi1, state.tau, &proposed.correlation(dist), y) else {
        return Ok(false);
    };
    let log_ratio = to_f64(cand_lm - cur_lm);
    if log_ratio.is_finite() && log_u < log_ratio.min(0.0) {
        which.set(state, candidate);
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Step 4: joint draw of the GP atoms.
///
/// Uses the pathwise identity `φ = f + K (K + τ⁻¹I)⁻¹ (y − f − ε)` with
/// `f ~ N(0, K)`, `ε ~ N(0, τ⁻¹I)` and `K = ψ1 E₀`, which has exactly the
/// stated conditional mean and covariance but never inverts `E₀`.
pub fn sample_phi<T: Real, R: Rng + ?Sized>(
    state: &GibbsState<T>,
    y: &DVector<T>,
    dist: &Distances<T>,
    rng: &mut R,
) -> Result<DVector<T>> {
    let n = y.len();
    let k = state.correlation(dist) * state.psi1;
    let lk = Factor::new(&k)?.l();
    let z1 = DVector::<T>::from_fn(n, |_, _| lit(StandardNormal.sample(rng)));
    let noise_sd = (T::one() / state.tau).sqrt();
    let eps = DVector::<T>::from_fn(n, |_, _| lit::<T>(StandardNormal.sample(rng)) * noise_sd);
    let f = lk * z1;
    let mut c = k.clone();
    let noise = T::one() / state.tau;
    for i in 0..n {
        c[(i, i)] += noise;
    }
    let cf = Factor::new(&c)?;
    let resid = y - &f - eps;
    Ok(f + k * cf.solve(&resid))
}

/// Runs steps 1–4 once against the given distances.
pub(crate) fn sweep<T: Real, R: Rng + ?Sized>(
    state: &mut GibbsState<T>,
    y: &DVector<T>,
    dist: &Distances<T>,
    priors: &Priors<T>,
    cfg: &GibbsConfig,
    accepted: &mut [usize; 3],
    rng: &mut R,
) -> Result<()> {
    if cfg.blocks.tau {
        state.tau = sample_tau(state, y, priors, rng)?;
    }
    if cfg.blocks.psi1 {
        state.psi1 = sample_psi1(state, dist, priors, rng)?;
    }
    if cfg.blocks.lengthscales {
        for (slot, which) in Lengthscale::ALL.into_iter().enumerate() {
            if mh_lengthscale_step(which, state, y, dist, cfg.proposal_sd, rng)? {
                accepted[slot] += 1;
            }
        }
    }
    if cfg.blocks.phi {
        state.phi = sample_phi(state, y, dist, rng)?;
    }
    Ok(())
}

/// Initial sampler state at `θ`, with `φ` at its conditional mean.
pub(crate) fn initial_state<T: Real>(
    init: &GpHyperparams<T>,
    y: &DVector<T>,
    dist: &Distances<T>,
) -> Result<GibbsState<T>> {
    let [tau, psi1, psi_u, psi_a, psi_z] = init.natural();
    let mut state = GibbsState {
        tau,
        psi1,
        psi_u,
        psi_a,
        psi_z,
        phi: DVector::zeros(y.len()),
    };
    let k = state.correlation(dist) * psi1;
    let mut c = k.clone();
    for i in 0..c.nrows() {
        c[(i, i)] += T::one() / tau;
    }
    state.phi = k * Factor::new(&c)?.solve(y);
    Ok(state)
}

pub(crate) fn check_inputs<T: Real>(
    y: &DVector<T>,
    dist: &Distances<T>,
    priors: &Priors<T>,
    cfg: &GibbsConfig,
) -> Result<()> {
    priors.validate()?;
    cfg.validate()?;
    if dist.rows() != y.len() || dist.cols() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for {}x{} distances",
            y.len(),
            dist.rows(),
            dist.cols()
        )));
    }
    Ok(())
}

/// Runs the sampler from `init` (normally the MLE) and returns the draws
/// retained after burn-in and thinning.
pub fn gibbs_sample<T: Real, R: Rng + ?Sized>(
    y: &DVector<T>,
    dist: &Distances<T>,
    priors: &Priors<T>,
    cfg: &GibbsConfig,
    init: &GpHyperparams<T>,
    rng: &mut R,
) -> Result<Chains<T>> {
    check_inputs(y, dist, priors, cfg)?;
    let mut state = initial_state(init, y, dist)?;
    run_from(&mut state, y, dist, priors, cfg, rng)
}

/// Runs the sampler from an explicit state.
pub(crate) fn run_from<T: Real, R: Rng + ?Sized>(
    state: &mut GibbsState<T>,
    y: &DVector<T>,
    dist: &Distances<T>,
    priors: &Priors<T>,
    cfg: &GibbsConfig,
    rng: &mut R,
) -> Result<Chains<T>> {
    let mut accepted = [0usize; 3];
    let mut draws = Vec::with_capacity(cfg.retained());
    for it in 0..cfg.iterations {
        sweep(state, y, dist, priors, cfg, &mut accepted, rng)?;
        if it >= cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
            draws.push(Draw::from_state(state));
        }
    }
    let total = cfg.iterations as f64;
    Ok(Chains {
        draws,
        acceptance: accepted.map(|a| a as f64 / total),
    })
}
