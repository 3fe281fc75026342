//! Gaussian process regression on embedded networks.
//!
//! The response is modelled as `y = φ(U, a, z) + ε` with `ε ~ N(0, τ⁻¹)` and
//! a zero-mean GP prior on `φ` whose kernel is
//!
//! ```text
//! K(i, i') = ψ1 · exp(−ψu ‖U_i − U_i'‖²_F − ψa (a_i − a_i')² − ψz ‖z_i − z_i'‖²)
//! ```
//!
//! Hyperparameters are carried on the log scale as
//! `θ = (log τ, log ψ1, log ψu, log ψa, log ψz)`.

mod gibbs;
mod kernel;
mod likelihood;
mod mle;
mod predict;
mod select;

pub use gibbs::{
    gibbs_sample, log_marginal, mh_lengthscale_step, sample_phi, sample_psi1, sample_tau, Chains,
    Draw, GibbsBlocks, GibbsConfig, GibbsState, Lengthscale, Priors,
};
pub use kernel::{cross_kernel, kernel_matrix, noiseless_correlation};
pub use likelihood::{gradient, neg_log_likelihood, objective_and_gradient};
pub use mle::{default_init, fit_mle, MleConfig, MleFit, MleStatus};
pub use predict::{predict, predict_mcmc, predict_mle, Prediction};
pub use select::{inclusion_probability, node_selection_sample, sample_inclusion, NodeDistances};

use nalgebra::{DMatrix, DVector};

use crate::embed::Embedding;
use crate::{Error, Real, Result};

/// Log-scale hyperparameters `(log τ, log ψ1, log ψu, log ψa, log ψz)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpHyperparams<T: Real> {
    pub theta: [T; 5],
}

impl<T: Real> GpHyperparams<T> {
    pub fn new(theta: [T; 5]) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "hyperparameters must be finite".into(),
            ));
        }
        Ok(Self { theta })
    }

    /// From natural-scale values, all of which must be positive.
    pub fn from_natural(tau: T, psi1: T, psi_u: T, psi_a: T, psi_z: T) -> Result<Self> {
        let vals = [tau, psi1, psi_u, psi_a, psi_z];
        if vals.iter().any(|v| !(*v > T::zero())) {
            return Err(Error::InvalidArgument(
                "hyperparameters must be positive".into(),
            ));
        }
        Self::new(vals.map(|v| v.ln()))
    }

    /// Noise precision τ.
    pub fn tau(&self) -> T {
        self.theta[0].exp()
    }

    pub fn psi1(&self) -> T {
        self.theta[1].exp()
    }

    pub fn psi_u(&self) -> T {
        self.theta[2].exp()
    }

    pub fn psi_a(&self) -> T {
        self.theta[3].exp()
    }

    pub fn psi_z(&self) -> T {
        self.theta[4].exp()
    }

    /// `(τ, ψ1, ψu, ψa, ψz)`.
    pub fn natural(&self) -> [T; 5] {
        self.theta.map(|v| v.exp())
    }
}

/// One subject's stage-2 inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Subject<T: Real> {
    pub id: String,
    pub embedding: Embedding<T>,
    /// Supplementary covariates; may be empty.
    pub covariates: DVector<T>,
}

impl<T: Real> Subject<T> {
    pub fn new(id: impl Into<String>, embedding: Embedding<T>, covariates: DVector<T>) -> Self {
        Self {
            id: id.into(),
            embedding,
            covariates,
        }
    }
}

/// Squared-distance matrices between subjects.
#[derive(Clone, Debug, PartialEq)]
pub struct Distances<T: Real> {
    /// `‖U_i − U_j‖²_F`.
    pub eu: DMatrix<T>,
    /// `(a_i − a_j)²`.
    pub ea: DMatrix<T>,
    /// `‖z_i − z_j‖²`.
    pub ez: DMatrix<T>,
}

impl<T: Real> Distances<T> {
    pub fn rows(&self) -> usize {
        self.eu.nrows()
    }

    pub fn cols(&self) -> usize {
        self.eu.ncols()
    }

    /// Same intercept and covariate distances with a replacement `E_u`.
    pub fn with_eu(&self, eu: DMatrix<T>) -> Self {
        Self {
            eu,
            ea: self.ea.clone(),
            ez: self.ez.clone(),
        }
    }
}

fn check_compatible<T: Real>(reference: &Subject<T>, other: &Subject<T>) -> Result<()> {
    let (r, o) = (&reference.embedding, &other.embedding);
    if r.nodes() != o.nodes() || r.dim() != o.dim() {
        return Err(Error::DimensionMismatch(format!(
            "subject '{}' has {}x{} latent scales, '{}' has {}x{}",
            reference.id,
            r.nodes(),
            r.dim(),
            other.id,
            o.nodes(),
            o.dim()
        )));
    }
    if r.pin() != o.pin() {
        return Err(Error::DimensionMismatch(format!(
            "subjects '{}' and '{}' were embedded with different pin values",
            reference.id, other.id
        )));
    }
    if reference.covariates.len() != other.covariates.len() {
        return Err(Error::DimensionMismatch(format!(
            "subject '{}' has {} covariates, '{}' has {}",
            reference.id,
            reference.covariates.len(),
            other.id,
            other.covariates.len()
        )));
    }
    Ok(())
}

fn squared_frobenius<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// Squared distances between every row subject and every column subject.
pub fn cross_distances<T: Real>(rows: &[Subject<T>], cols: &[Subject<T>]) -> Result<Distances<T>> {
    if let Some(first) = rows.first().or(cols.first()) {
        for s in rows.iter().chain(cols) {
            check_compatible(first, s)?;
        }
    }
    let (m, n) = (rows.len(), cols.len());
    let eu = DMatrix::from_fn(m, n, |i, j| {
        squared_frobenius(rows[i].embedding.scales(), cols[j].embedding.scales())
    });
    let ea = DMatrix::from_fn(m, n, |i, j| {
        let d = rows[i].embedding.intercept() - cols[j].embedding.intercept();
        d * d
    });
    let ez = DMatrix::from_fn(m, n, |i, j| {
        (&rows[i].covariates - &cols[j].covariates).norm_squared()
    });
    Ok(Distances { eu, ea, ez })
}

/// Symmetric, zero-diagonal `(E_u, E_a, E_z)` for a set of subjects.
pub fn distance_matrices<T: Real>(subjects: &[Subject<T>]) -> Result<Distances<T>> {
    cross_distances(subjects, subjects)
}

/// Training subjects, their responses and the precomputed distances.
#[derive(Clone, Debug)]
pub struct TrainingSet<T: Real> {
    pub subjects: Vec<Subject<T>>,
    pub y: DVector<T>,
    pub dist: Distances<T>,
}

impl<T: Real> TrainingSet<T> {
    pub fn new(subjects: Vec<Subject<T>>, y: DVector<T>) -> Result<Self> {
        if subjects.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} subjects but {} responses",
                subjects.len(),
                y.len()
            )));
        }
        if subjects.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        let dist = distance_matrices(&subjects)?;
        Ok(Self { subjects, y, dist })
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn nodes(&self) -> usize {
        self.subjects[0].embedding.nodes()
    }
}

/// How a model was fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Mle,
    Mcmc,
}

/// A fitted stage-2 model.
#[derive(Clone, Debug)]
pub struct GpModel<T: Real> {
    pub training: TrainingSet<T>,
    pub mode: FitMode,
    /// Maximum-likelihood estimate (always computed; it initializes MCMC).
    pub theta_hat: GpHyperparams<T>,
    pub mle: MleFit<T>,
    /// Posterior draws after burn-in, present in MCMC mode.
    pub chains: Option<Chains<T>>,
    pub priors: Priors<T>,
    pub sampler: GibbsConfig,
}

impl<T: Real> GpModel<T> {
    /// Fits `θ̂` by Armijo gradient descent and, in MCMC mode, runs the
    /// Gibbs sampler initialized at `θ̂`.
    pub fn fit<R: rand::Rng + ?Sized>(
        training: TrainingSet<T>,
        mode: FitMode,
        mle_cfg: &MleConfig,
        priors: Priors<T>,
        sampler: GibbsConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let init = default_init(&training.y, &training.dist);
        let mle = fit_mle(&training.y, &training.dist, init, mle_cfg)?;
        let theta_hat = mle.theta;
        let chains = match mode {
            FitMode::Mle => None,
            FitMode::Mcmc => Some(gibbs_sample(
                &training.y,
                &training.dist,
                &priors,
                &sampler,
                &theta_hat,
                rng,
            )?),
        };
        Ok(Self {
            training,
            mode,
            theta_hat,
            mle,
            chains,
            priors,
            sampler,
        })
    }

    /// MCMC fit with node indicators, initialized at `θ̂`.
    pub fn fit_node_selection<R: rand::Rng + ?Sized>(
        training: TrainingSet<T>,
        mle_cfg: &MleConfig,
        priors: Priors<T>,
        sampler: GibbsConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let init = default_init(&training.y, &training.dist);
        let mle = fit_mle(&training.y, &training.dist, init, mle_cfg)?;
        let theta_hat = mle.theta;
        let chains = node_selection_sample(
            &training.y,
            &training.subjects,
            &priors,
            &sampler,
            &theta_hat,
            rng,
        )?;
        Ok(Self {
            training,
            mode: FitMode::Mcmc,
            theta_hat,
            mle,
            chains: Some(chains),
            priors,
            sampler,
        })
    }

    /// See [`predict()`].
    pub fn predict<R: rand::Rng + ?Sized>(
        &self,
        test: &[Subject<T>],
        rng: &mut R,
    ) -> Result<Prediction<T>> {
        predict(self, test, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn random_subjects(
        n: usize,
        p: usize,
        d: usize,
        nz: usize,
        seed: u64,
    ) -> Vec<Subject<f64>> {
        let mut rng = derive_rng(seed, 99);
        (0..n)
            .map(|i| {
                let u = DMatrix::from_fn(p, d, |_, _| {
                    0.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng)
                });
                let a: f64 = StandardNormal.sample(&mut rng);
                let z = DVector::from_fn(nz, |_, _| StandardNormal.sample(&mut rng));
                Subject::new(format!("s{i}"), Embedding::new(a, u, 0.5).unwrap(), z)
            })
            .collect()
    }

    #[test]
    fn identical_subjects_have_zero_distance() {
        let s = random_subjects(1, 4, 3, 2, 1).pop().unwrap();
        let d = distance_matrices(&[s.clone(), s]).unwrap();
        assert!(d
            .eu
            .iter()
            .chain(d.ea.iter())
            .chain(d.ez.iter())
            .all(|&v| v == 0.0));
    }

    #[test]
    fn single_entry_frobenius() {
        let s = random_subjects(1, 4, 3, 0, 2).pop().unwrap();
        let mut u = s.embedding.scales().clone();
        u[(2, 1)] += 2.0;
        let t = Subject::new(
            "t",
            Embedding::new(s.embedding.intercept(), u, 0.5).unwrap(),
            DVector::zeros(0),
        );
        let d = distance_matrices(&[s, t]).unwrap();
        assert_relative_eq!(d.eu[(0, 1)], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn distances_match_double_loop() {
        let subs = random_subjects(6, 5, 3, 2, 3);
        let d = distance_matrices(&subs).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let (ui, uj) = (subs[i].embedding.scales(), subs[j].embedding.scales());
                let mut eu = 0.0;
                for r in 0..5 {
                    for c in 0..3 {
                        eu += (ui[(r, c)] - uj[(r, c)]).powi(2);
                    }
                }
                let ea = (subs[i].embedding.intercept() - subs[j].embedding.intercept()).powi(2);
                let ez: f64 = (0..2)
                    .map(|c| (subs[i].covariates[c] - subs[j].covariates[c]).powi(2))
                    .sum();
                assert_relative_eq!(d.eu[(i, j)], eu, epsilon = 1e-12);
                assert_relative_eq!(d.ea[(i, j)], ea, epsilon = 1e-12);
                assert_relative_eq!(d.ez[(i, j)], ez, epsilon = 1e-12);
            }
            assert_eq!(d.eu[(i, i)], 0.0);
        }
        assert_eq!(d.eu, d.eu.transpose());
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let mut subs = random_subjects(2, 4, 3, 1, 4);
        subs.extend(random_subjects(1, 4, 2, 1, 5));
        assert!(matches!(
            distance_matrices(&subs),
            Err(Error::DimensionMismatch(_))
        ));
        let mut subs = random_subjects(2, 4, 3, 1, 4);
        subs.extend(random_subjects(1, 4, 3, 2, 5));
        assert!(matches!(
            distance_matrices(&subs),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn column_shift_leaves_eu_unchanged() {
        let subs = random_subjects(4, 5, 3, 0, 6);
        let shifted: Vec<_> = subs
            .iter()
            .map(|s| {
                let mut u = s.embedding.scales().clone();
                for r in 0..5 {
                    u[(r, 2)] += 1.75;
                }
                Subject::new(
                    s.id.clone(),
                    Embedding::new(s.embedding.intercept(), u, 0.5).unwrap(),
                    s.covariates.clone(),
                )
            })
            .collect();
        let (a, b) = (
            distance_matrices(&subs).unwrap(),
            distance_matrices(&shifted).unwrap(),
        );
        for (x, y) in a.eu.iter().zip(b.eu.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }
}
