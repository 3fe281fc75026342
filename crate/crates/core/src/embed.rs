//! Per-subject latent-scale embedding.
//!
//! Edge `(k, l)` of a subject's network is modelled as
//! `Bernoulli(sigmoid(a + u_k · u_l))` with a flat prior on the intercept `a`
//! and independent `N(0, σ_u²)` priors on the free latent coordinates. The
//! first coordinate of every `u_k` is pinned to a constant `b` to remove the
//! rotational non-identifiability. The MAP estimate is found by EM with
//! Pólya-Gamma latent variables: the E-step replaces each `ω_kl` by its
//! conditional mean, after which the M-step is a sequence of closed-form
//! weighted least-squares updates (intercept first, then node by node).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::network::{classical_mds, pair_count, pair_index, upper_pairs, BinaryNetwork, EdgeSet};
use crate::{lit, to_f64, Error, Real, Result};

/// How the prior precision enters the per-node latent update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorTermMode {
    /// `σ_u⁻² I` inside every summand of the precision, i.e. `p − 1` copies.
    #[default]
    Verbatim,
    /// `σ_u⁻² I` added once: the exact coordinate-wise MAP update.
    SingleCopy,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct EmConfig<T: Real> {
    /// Latent dimension `d`, including the pinned coordinate.
    pub dim: usize,
    pub sigma_u_sq: T,
    /// Value `b` of the pinned first coordinate.
    pub pin: T,
    pub max_iters: usize,
    /// Stop once `|ΔLP| / (|LP| + 1)` drops below this.
    pub rel_tol: T,
    pub prior_term_mode: PriorTermMode,
}

impl<T: Real> Default for EmConfig<T> {
    fn default() -> Self {
        Self {
            dim: 10,
            sigma_u_sq: lit(0.2),
            pin: lit(0.5),
            max_iters: 500,
            rel_tol: lit(1e-6),
            prior_term_mode: PriorTermMode::Verbatim,
        }
    }
}

impl<T: Real> EmConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "latent dimension must be at least 2 (one pinned + one free), got {}",
                self.dim
            )));
        }
        if !(self.sigma_u_sq > T::zero()) || !self.sigma_u_sq.is_finite() {
            return Err(Error::InvalidArgument("sigma_u_sq must be positive".into()));
        }
        if !(self.rel_tol > T::zero()) {
            return Err(Error::InvalidArgument("rel_tol must be positive".into()));
        }
        if !self.pin.is_finite() {
            return Err(Error::InvalidArgument("pin value must be finite".into()));
        }
        Ok(())
    }
}

/// Intercept `a` and `p×d` latent scales `U` whose first column equals `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding<T: Real> {
    intercept: T,
    scales: DMatrix<T>,
    pin: T,
}

impl<T: Real> Embedding<T> {
    /// Builds an embedding from a full `p×d` matrix, overwriting column 0 with `pin`.
    pub fn new(intercept: T, mut scales: DMatrix<T>, pin: T) -> Result<Self> {
        if scales.ncols() < 1 {
            return Err(Error::InvalidArgument(
                "latent dimension must be positive".into(),
            ));
        }
        scales.column_mut(0).fill(pin);
        let emb = Self {
            intercept,
            scales,
            pin,
        };
        if !emb.is_finite() {
            return Err(Error::Numerical("embedding has non-finite entries".into()));
        }
        Ok(emb)
    }

    /// Builds an embedding whose first column must already equal `pin`.
    pub fn from_parts(intercept: T, scales: DMatrix<T>, pin: T) -> Result<Self> {
        if scales.ncols() < 1 || scales.column(0).iter().any(|&v| v != pin) {
            return Err(Error::InvalidArgument(
                "first latent column must equal the pin value".into(),
            ));
        }
        Self::new(intercept, scales, pin)
    }

    pub fn intercept(&self) -> T {
        self.intercept
    }

    pub fn scales(&self) -> &DMatrix<T> {
        &self.scales
    }

    pub fn pin(&self) -> T {
        self.pin
    }

    pub fn nodes(&self) -> usize {
        self.scales.nrows()
    }

    pub fn dim(&self) -> usize {
        self.scales.ncols()
    }

    fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.scales.iter().all(|v| v.is_finite())
    }

    /// `u_k · u_l`.
    pub fn inner(&self, k: usize, l: usize) -> T {
        self.scales.row(k).dot(&self.scales.row(l))
    }

    pub fn linear_predictor(&self, k: usize, l: usize) -> T {
        self.intercept + self.inner(k, l)
    }

    /// Permutes node rows: row `k` of the result is row `perm[k]` of `self`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Self {
        let scales = DMatrix::from_fn(self.nodes(), self.dim(), |k, c| self.scales[(perm[k], c)]);
        Self {
            intercept: self.intercept,
            scales,
            pin: self.pin,
        }
    }
}

/// `1 / (1 + e^{−x})` without overflow.
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Edge probability `sigmoid(a + u_k · u_l)`.
pub fn edge_probability<T: Real>(a: T, u_k: &[T], u_l: &[T]) -> T {
    let dot = u_k
        .iter()
        .zip(u_l)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    sigmoid(a + dot)
}

/// Fitted probabilities for every pair, in edge-vector order.
pub fn fitted_edge_probabilities<T: Real>(emb: &Embedding<T>) -> Vec<T> {
    upper_pairs(emb.nodes())
        .map(|(k, l)| sigmoid(emb.linear_predictor(k, l)))
        .collect()
}

/// Conditional mean of a `PG(1, δ)` variable, `tanh(δ/2) / (2δ)`.
///
/// Uses the Taylor expansion `1/4 − δ²/48 + δ⁴/480` for `|δ| < 1e-4`.
pub fn pg_expectation<T: Real>(delta: T) -> T {
    let x = delta.abs();
    if x < lit(1e-4) {
        let x2 = x * x;
        lit::<T>(0.25) - x2 / lit(48.0) + x2 * x2 / lit(480.0)
    } else {
        (x * lit(0.5)).tanh() / (lit::<T>(2.0) * x)
    }
}

fn check_dims<T: Real>(e: &EdgeSet, emb: &Embedding<T>) -> Result<()> {
    if e.nodes() != emb.nodes() {
        return Err(Error::DimensionMismatch(format!(
            "network has {} nodes but embedding has {}",
            e.nodes(),
            emb.nodes()
        )));
    }
    Ok(())
}

/// Log posterior (up to the flat intercept prior): Bernoulli log-likelihood
/// of every pair plus `log N(u | 0, σ_u²)` for each free coordinate.
pub fn log_posterior<T: Real>(e: &EdgeSet, emb: &Embedding<T>, cfg: &EmConfig<T>) -> Result<T> {
    check_dims(e, emb)?;
    let p = emb.nodes();
    let mut ll = T::zero();
    for ((k, l), &y) in upper_pairs(p).zip(e.as_slice()) {
        let eta = emb.linear_predictor(k, l);
        if y == 1 {
            ll += eta;
        }
        ll -= softplus(eta);
    }
    Ok(ll + log_prior(emb, cfg.sigma_u_sq))
}

fn log_prior<T: Real>(emb: &Embedding<T>, sigma_u_sq: T) -> T {
    let two_pi: T = lit(std::f64::consts::TAU);
    let half: T = lit(0.5);
    let norm = -half * (two_pi * sigma_u_sq).ln();
    let free = emb.scales.columns(1, emb.dim() - 1);
    let count: T = lit(free.len() as f64);
    count * norm - half * free.norm_squared() / sigma_u_sq
}

/// E-step: `ω_kl = E[ω | δ_kl]` with `δ_kl = a + u_k · u_l`.
pub fn e_step<T: Real>(emb: &Embedding<T>) -> Vec<T> {
    upper_pairs(emb.nodes())
        .map(|(k, l)| pg_expectation(emb.linear_predictor(k, l)))
        .collect()
}

/// Closed-form intercept update
/// `a = Σ [e_kl − ½ − ω_kl u_k·u_l] / Σ ω_kl`.
pub fn em_update_intercept<T: Real>(e: &EdgeSet, omega: &[T], scales: &DMatrix<T>) -> Result<T> {
    let p = scales.nrows();
    if e.nodes() != p || omega.len() != pair_count(p) {
        return Err(Error::DimensionMismatch(
            "edge set, weights and latent scales disagree".into(),
        ));
    }
    let half: T = lit(0.5);
    let mut num = T::zero();
    let mut den = T::zero();
    for (((k, l), &y), &w) in upper_pairs(p).zip(e.as_slice()).zip(omega) {
        let uu = scales.row(k).dot(&scales.row(l));
        num += lit::<T>(y as f64) - half - w * uu;
        den += w;
    }
    if !(den > T::zero()) {
        return Err(Error::Numerical(
            "intercept update has zero total weight".into(),
        ));
    }
    Ok(num / den)
}

/// Closed-form update of node `k`'s free coordinates given `ω`, `a` and the
/// current coordinates of every other node.
///
/// Solves `x · P = r`, where
/// `r = Σ_{j≠k} [e_jk − ½ − (a + b²) ω_jk] u_{j(−1)}` and
/// `P = Σ_{j≠k} ω_jk u_{j(−1)}ᵀ u_{j(−1)} + c σ_u⁻² I`, with `c = p − 1`
/// copies of the prior precision in [`PriorTermMode::Verbatim`] and `c = 1`
/// in [`PriorTermMode::SingleCopy`].
pub fn em_update_latent<T: Real>(
    k: usize,
    e: &EdgeSet,
    omega: &[T],
    a: T,
    state: &Embedding<T>,
    cfg: &EmConfig<T>,
) -> Result<DVector<T>> {
    check_dims(e, state)?;
    let p = state.nodes();
    if k >= p {
        return Err(Error::InvalidArgument(format!("node {k} out of range")));
    }
    let free = state.dim() - 1;
    let b = state.pin;
    let half: T = lit(0.5);
    let offset = a + b * b;
    let mut rhs = DVector::<T>::zeros(free);
    let mut prec = DMatrix::<T>::zeros(free, free);
    let edges = e.as_slice();
    for j in (0..p).filter(|&j| j != k) {
        let idx = pair_index(p, j, k);
        let w = omega[idx];
        let coef = lit::<T>(edges[idx] as f64) - half - offset * w;
        let uj = state.scales.view((j, 1), (1, free));
        for c in 0..free {
            rhs[c] += coef * uj[(0, c)];
        }
        for r in 0..free {
            let wr = w * uj[(0, r)];
            for c in 0..free {
                prec[(r, c)] += wr * uj[(0, c)];
            }
        }
    }
    let copies = match cfg.prior_term_mode {
        PriorTermMode::Verbatim => (p - 1).max(1),
        PriorTermMode::SingleCopy => 1,
    };
    let ridge = lit::<T>(copies as f64) / cfg.sigma_u_sq;
    for c in 0..free {
        prec[(c, c)] += ridge;
    }
    // P is symmetric, so x P = r is P x = r.
    let chol = nalgebra::Cholesky::new(prec)
        .ok_or_else(|| Error::Numerical(format!("singular latent update system at node {k}")))?;
    Ok(chol.solve(&rhs))
}

/// Result of fitting one subject.
#[derive(Clone, Debug)]
pub struct EmFit<T: Real> {
    pub embedding: Embedding<T>,
    /// Log posterior at the initial point followed by one value per iteration.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> EmFit<T> {
    pub fn final_log_posterior(&self) -> T {
        *self.trace.last().expect("trace is never empty")
    }
}

/// Default starting point: classical MDS of hop distances with the first
/// column overwritten by the pin, and an intercept matching the observed
/// density on the logit scale.
pub fn initial_embedding<T: Real, R: Rng + ?Sized>(
    e: &EdgeSet,
    cfg: &EmConfig<T>,
    rng: &mut R,
) -> Result<Embedding<T>> {
    let p = e.nodes();
    let net = BinaryNetwork::from_edge_set(e);
    let dist = net.shortest_path_distances();
    let coords: DMatrix<T> = if cfg.dim <= p {
        classical_mds(&dist, cfg.dim, rng)?
    } else {
        let mut c = DMatrix::<T>::zeros(p, cfg.dim);
        let head: DMatrix<T> = classical_mds(&dist, p, rng)?;
        c.columns_mut(0, p).copy_from(&head);
        c
    };
    let scales = {
        let mut s = coords;
        s.column_mut(0).fill(cfg.pin);
        s
    };
    let m = pair_count(p).max(1) as f64;
    let dens = e.density().clamp(0.5 / m, 1.0 - 0.5 / m);
    let mean_inner = if p > 1 {
        upper_pairs(p)
            .map(|(k, l)| to_f64(scales.row(k).dot(&scales.row(l))))
            .sum::<f64>()
            / m
    } else {
        0.0
    };
    let a = (dens / (1.0 - dens)).ln() - mean_inner;
    Embedding::new(lit(a), scales, cfg.pin)
}

/// Fits `(a, U)` for one subject by Pólya-Gamma EM.
///
/// When `init` is `None` the starting point comes from
/// [`initial_embedding`]; `rng` is only consumed by the MDS fallback for
/// degenerate spectra. The first column of `init` is overwritten by the pin.
pub fn embed_subject<T: Real, R: Rng + ?Sized>(
    e: &EdgeSet,
    cfg: &EmConfig<T>,
    init: Option<&DMatrix<T>>,
    rng: &mut R,
) -> Result<EmFit<T>> {
    cfg.validate()?;
    let p = e.nodes();
    let mut emb = match init {
        Some(u0) => {
            if u0.nrows() != p || u0.ncols() != cfg.dim {
                return Err(Error::DimensionMismatch(format!(
                    "initial scales are {}x{}, expected {}x{}",
                    u0.nrows(),
                    u0.ncols(),
                    p,
                    cfg.dim
                )));
            }
            let mut start = initial_embedding(e, cfg, rng)?;
            start.scales = u0.clone();
            start.scales.column_mut(0).fill(cfg.pin);
            start
        }
        None => initial_embedding(e, cfg, rng)?,
    };
    let mut lp = log_posterior(e, &emb, cfg)?;
    if !lp.is_finite() {
        return Err(Error::Numerical(
            "non-finite log posterior at initialization".into(),
        ));
    }
    let mut trace = vec![lp];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let omega = e_step(&emb);
        emb.intercept = em_update_intercept(e, &omega, &emb.scales)?;
        for k in 0..p {
            let x = em_update_latent(k, e, &omega, emb.intercept, &emb, cfg)?;
            for (c, v) in x.iter().enumerate() {
                emb.scales[(k, c + 1)] = *v;
            }
        }
        let next = log_posterior(e, &emb, cfg)?;
        if !next.is_finite() || !emb.is_finite() {
            return Err(Error::Numerical(format!(
                "log posterior became non-finite at iteration {iterations} (previous {})",
                to_f64(lp)
            )));
        }
        trace.push(next);
        let rel = (next - lp).abs() / (lp.abs() + T::one());
        lp = next;
        if rel < cfg.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(EmFit {
        embedding: emb,
        trace,
        iterations,
        converged,
    })
}
