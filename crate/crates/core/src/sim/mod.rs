//! Synthetic data with a known network-response relationship, evaluation
//! metrics, and comparison baselines.
//!
//! Each subject's network is drawn from the latent-scale model with intercept
//! `a_i ~ N(0, 4)` and `U_i` entries `N(0, 1)`. A random node subset `C` of
//! size `⌈S_p p⌉` is active, and the response is
//!
//! ```text
//! y_i = Σ_{k<l; k,l ∈ C} sin(π_i,kl · η_i,kl) + ε_i,   η ~ N(2, 1),  ε ~ N(0, 0.25)
//! ```
//!
//! where `π_i,kl` is the true edge probability. Responses are standardized by
//! the training mean and sample standard deviation.

mod baselines;
mod bench;
mod eval;

pub use baselines::{
    edge_matrix, pca_gpr_baseline, pca_scores, ridge_baseline, ridge_fit, PcaGprFit, PcaScores,
    RidgeFit, RidgeResult, RIDGE_FOLDS, RIDGE_GRID,
};
pub use bench::{
    embed_all, embed_one, run_replicate, Method, MethodResult, ReplicateConfig, GP_STREAM,
};
pub use eval::{evaluate, EvalReport};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};

use crate::embed::sigmoid;
use crate::network::{upper_pairs, EdgeSet};
use crate::rng::derive_rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Node count.
    pub p: usize,
    /// True latent dimension.
    pub d0: usize,
    /// Fraction of nodes in the active set.
    pub sparsity: f64,
    pub seed: u64,
    pub intercept_var: f64,
    pub latent_var: f64,
    pub eta_mean: f64,
    pub eta_var: f64,
    pub noise_var: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_train: 50,
            n_test: 50,
            p: 40,
            d0: 5,
            sparsity: 0.5,
            seed: 0,
            intercept_var: 4.0,
            latent_var: 1.0,
            eta_mean: 2.0,
            eta_var: 1.0,
            noise_var: 0.25,
        }
    }
}

impl SimConfig {
    /// `⌈S_p p⌉`, tolerant of rounding in the product.
    pub fn active_count(&self) -> usize {
        ((self.sparsity * self.p as f64) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sparsity > 0.0 && self.sparsity < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sparsity must lie in (0, 1), got {}",
                self.sparsity
            )));
        }
        if self.n_train < 1 || self.n_test < 1 {
            return Err(Error::InvalidArgument(
                "need at least one training and one test subject".into(),
            ));
        }
        if self.d0 < 1 {
            return Err(Error::InvalidArgument(
                "latent dimension must be at least 1".into(),
            ));
        }
        if self.active_count() < 2 {
            return Err(Error::InvalidArgument(format!(
                "active set of {} node(s) contains no edges",
                self.active_count()
            )));
        }
        let vars = [
            self.intercept_var,
            self.latent_var,
            self.eta_var,
            self.noise_var,
        ];
        if vars.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || !self.eta_mean.is_finite() {
            return Err(Error::InvalidArgument(
                "variances must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn subjects(&self) -> usize {
        self.n_train + self.n_test
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// A generated data set; training subjects come first.
#[derive(Clone, Debug, PartialEq)]
pub struct SimDataset {
    pub config: SimConfig,
    pub networks: Vec<EdgeSet>,
    /// Standardized responses.
    pub y: Vec<f64>,
    /// Responses before standardization.
    pub y_raw: Vec<f64>,
    /// True edge probabilities per subject, in edge-vector order.
    pub true_probs: Vec<Vec<f64>>,
    /// Active nodes, ascending, 0-indexed.
    pub active: Vec<usize>,
    pub split: Vec<Split>,
    /// Training mean and standard deviation used for standardization.
    pub y_center: f64,
    pub y_scale: f64,
}

impl SimDataset {
    pub fn train_indices(&self) -> Vec<usize> {
        (0..self.config.n_train).collect()
    }

    pub fn test_indices(&self) -> Vec<usize> {
        (self.config.n_train..self.config.subjects()).collect()
    }

    pub fn subject_id(i: usize) -> String {
        format!("s{:03}", i + 1)
    }
}

fn normal(mean: f64, var: f64) -> Result<Normal<f64>> {
    Normal::new(mean, var.sqrt())
        .map_err(|e| Error::InvalidArgument(format!("normal({mean}, {var}): {e}")))
}

/// Mean and sample standard deviation; the scale falls back to 1 when it is
/// undefined or zero.
pub fn standardization(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 1.0);
    }
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

/// Generates a data set; identical configurations give identical output.
pub fn generate_scenario1(cfg: &SimConfig) -> Result<SimDataset> {
    cfg.validate()?;
    let mut rng = derive_rng(cfg.seed, 0);
    let p = cfg.p;
    let mut active = sample(&mut rng, p, cfg.active_count()).into_vec();
    active.sort_unstable();
    let mut in_c = vec![false; p];
    for &k in &active {
        in_c[k] = true;
    }

    let a_dist = normal(0.0, cfg.intercept_var)?;
    let u_dist = normal(0.0, cfg.latent_var)?;
    let eta_dist = normal(cfg.eta_mean, cfg.eta_var)?;
    let eps_dist = normal(0.0, cfg.noise_var)?;

    let n = cfg.subjects();
    let mut networks = Vec::with_capacity(n);
    let mut true_probs = Vec::with_capacity(n);
    let mut y_raw = Vec::with_capacity(n);
    for _ in 0..n {
        let a = a_dist.sample(&mut rng);
        let u = DMatrix::from_fn(p, cfg.d0, |_, _| u_dist.sample(&mut rng));
        let mut probs = Vec::with_capacity(p * (p.saturating_sub(1)) / 2);
        let mut edges = Vec::with_capacity(probs.capacity());
        for (k, l) in upper_pairs(p) {
            let pr = sigmoid(a + u.row(k).dot(&u.row(l)));
            edges.push(u8::from(rand::Rng::random::<f64>(&mut rng) < pr));
            probs.push(pr);
        }
        let mut resp = 0.0;
        for ((k, l), pr) in upper_pairs(p).zip(&probs) {
            if in_c[k] && in_c[l] {
                resp += (pr * eta_dist.sample(&mut rng)).sin();
            }
        }
        resp += eps_dist.sample(&mut rng);
        networks.push(EdgeSet::new(p, edges)?);
        true_probs.push(probs);
        y_raw.push(resp);
    }

    let (center, scale) = standardization(&y_raw[..cfg.n_train]);
    let y = y_raw.iter().map(|v| (v - center) / scale).collect();
    let split = (0..n)
        .map(|i| {
            if i < cfg.n_train {
                Split::Train
            } else {
                Split::Test
            }
        })
        .collect();
    Ok(SimDataset {
        config: cfg.clone(),
        networks,
        y,
        y_raw,
        true_probs,
        active,
        split,
        y_center: center,
        y_scale: scale,
    })
}
