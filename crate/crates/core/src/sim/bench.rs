//! One replicate of the comparison: embed every subject, then fit and score
//! each method on the held-out subjects.

use nalgebra::DVector;

use super::{evaluate, pca_gpr_baseline, ridge_baseline, EvalReport, SimDataset};
use crate::embed::{embed_subject, EmConfig, EmFit, Embedding};
use crate::gp::{FitMode, GibbsConfig, GpModel, MleConfig, Priors, Subject, TrainingSet};
use crate::network::EdgeSet;
use crate::rng::derive_rng;
use crate::Result;

/// RNG stream used for the GP fit and predictions of a replicate; embedding
/// subject `i` uses stream `i`.
pub const GP_STREAM: u64 = 1 << 32;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub enum Method {
    /// GP on embeddings, maximum likelihood.
    #[serde(rename = "ls-gpr1")]
    LsGpr1,
    /// GP on embeddings, posterior sampling.
    #[serde(rename = "ls-gpr2")]
    LsGpr2,
    #[serde(rename = "ridge")]
    Ridge,
    #[serde(rename = "pca-gpr")]
    PcaGpr,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::LsGpr1,
        Method::LsGpr2,
        Method::Ridge,
        Method::PcaGpr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::LsGpr1 => "ls-gpr1",
            Method::LsGpr2 => "ls-gpr2",
            Method::Ridge => "ridge",
            Method::PcaGpr => "pca-gpr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    fn needs_embeddings(self) -> bool {
        matches!(self, Method::LsGpr1 | Method::LsGpr2)
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ReplicateConfig {
    pub em: EmConfig<f64>,
    pub mle: MleConfig,
    pub sampler: GibbsConfig,
    pub priors: Priors<f64>,
    pub methods: Vec<Method>,
    /// Principal components for the PCA baseline; `None` uses the default rule.
    pub pca_components: Option<usize>,
}

impl Default for ReplicateConfig {
    fn default() -> Self {
        Self {
            em: EmConfig::default(),
            mle: MleConfig::default(),
            sampler: GibbsConfig::default(),
            priors: Priors::default(),
            methods: Method::ALL.to_vec(),
            pca_components: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub report: EvalReport,
}

/// Embeds subject `index` with its own RNG stream of `seed`.
pub fn embed_one(
    net: &EdgeSet,
    cfg: &EmConfig<f64>,
    seed: u64,
    index: usize,
) -> Result<EmFit<f64>> {
    embed_subject(net, cfg, None, &mut derive_rng(seed, index as u64))
}

/// Embeds every network in order; equal to calling [`embed_one`] per index.
pub fn embed_all(nets: &[EdgeSet], cfg: &EmConfig<f64>, seed: u64) -> Result<Vec<EmFit<f64>>> {
    nets.iter()
        .enumerate()
        .map(|(i, e)| embed_one(e, cfg, seed, i))
        .collect()
}

fn subjects(emb: &[Embedding<f64>], idx: &[usize]) -> Vec<Subject<f64>> {
    idx.iter()
        .map(|&i| Subject::new(SimDataset::subject_id(i), emb[i].clone(), DVector::zeros(0)))
        .collect()
}

/// Scores the requested methods on one data set. `embeddings` must hold one
/// embedding per subject when an embedding-based method is requested.
pub fn run_replicate(
    ds: &SimDataset,
    embeddings: &[Embedding<f64>],
    cfg: &ReplicateConfig,
    seed: u64,
) -> Result<Vec<MethodResult>> {
    let (tr, te) = (ds.train_indices(), ds.test_indices());
    let y_tr: Vec<f64> = tr.iter().map(|&i| ds.y[i]).collect();
    let y_te: Vec<f64> = te.iter().map(|&i| ds.y[i]).collect();
    let nets_tr: Vec<EdgeSet> = tr.iter().map(|&i| ds.networks[i].clone()).collect();
    let nets_te: Vec<EdgeSet> = te.iter().map(|&i| ds.networks[i].clone()).collect();

    let mut out = Vec::with_capacity(cfg.methods.len());
    let mut rng = derive_rng(seed, GP_STREAM);
    let mle_model = if cfg.methods.iter().any(|m| m.needs_embeddings()) {
        let training =
            TrainingSet::new(subjects(embeddings, &tr), DVector::from_vec(y_tr.clone()))?;
        let test = subjects(embeddings, &te);
        let mcmc = cfg.methods.contains(&Method::LsGpr2);
        let mode = if mcmc { FitMode::Mcmc } else { FitMode::Mle };
        let model = GpModel::fit(
            training,
            mode,
            &cfg.mle,
            cfg.priors,
            cfg.sampler.clone(),
            &mut rng,
        )?;
        Some((model, test))
    } else {
        None
    };

    for &method in &cfg.methods {
        let report = match method {
            Method::LsGpr1 | Method::LsGpr2 => {
                let (model, test) = mle_model.as_ref().expect("fitted above");
                let pred = if method == Method::LsGpr1 {
                    let cross = crate::gp::cross_distances(test, &model.training.subjects)?;
                    crate::gp::predict_mle(
                        &model.theta_hat,
                        &model.training.y,
                        &model.training.dist,
                        &cross,
                    )?
                } else {
                    model.predict(test, &mut rng)?
                };
                evaluate(
                    pred.mean.as_slice(),
                    Some((pred.lower.as_slice(), pred.upper.as_slice())),
                    &y_te,
                )?
            }
            Method::Ridge => {
                let r = ridge_baseline(&nets_tr, &y_tr, &nets_te)?;
                evaluate(&r.predictions, None, &y_te)?
            }
            Method::PcaGpr => {
                let r = pca_gpr_baseline(&nets_tr, &y_tr, &nets_te, cfg.pca_components, &cfg.mle)?;
                let p = &r.prediction;
                evaluate(
                    p.mean.as_slice(),
                    Some((p.lower.as_slice(), p.upper.as_slice())),
                    &y_te,
                )?
            }
        };
        out.push(MethodResult { method, report });
    }
    Ok(out)
}
