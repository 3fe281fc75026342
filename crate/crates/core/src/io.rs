//! On-disk formats: embeddings, data-set bundles, responses, fitted models,
//! chains, predictions and evaluation reports.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! value read back is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::Embedding;
use crate::gp::{
    Chains, Draw, FitMode, GibbsConfig, GpHyperparams, GpModel, MleConfig, MleFit, MleStatus,
    Prediction, Priors, Subject, TrainingSet,
};
use crate::network::{load_network, BinaryNetwork, NetworkFormat};
use crate::sim::{EvalReport, SimConfig, SimDataset, Split};
use crate::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// `{a, b, d, p, U}` with `U` flattened row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub a: f64,
    pub b: f64,
    pub d: usize,
    pub p: usize,
    #[serde(rename = "U")]
    pub u: Vec<f64>,
}

impl From<&Embedding<f64>> for EmbeddingRecord {
    fn from(e: &Embedding<f64>) -> Self {
        let s = e.scales();
        let mut u = Vec::with_capacity(s.len());
        for r in 0..s.nrows() {
            u.extend(s.row(r).iter());
        }
        Self {
            a: e.intercept(),
            b: e.pin(),
            d: e.dim(),
            p: e.nodes(),
            u,
        }
    }
}

impl EmbeddingRecord {
    pub fn to_embedding(&self) -> Result<Embedding<f64>> {
        if self.u.len() != self.p * self.d {
            return Err(Error::Parse(format!(
                "embedding has {} latent entries, expected {}x{}",
                self.u.len(),
                self.p,
                self.d
            )));
        }
        let scales = DMatrix::from_row_slice(self.p, self.d, &self.u);
        Embedding::from_parts(self.a, scales, self.b)
    }
}

pub fn write_embedding(path: impl AsRef<Path>, e: &Embedding<f64>) -> Result<()> {
    write_json(path, &EmbeddingRecord::from(e))
}

pub fn read_embedding(path: impl AsRef<Path>) -> Result<Embedding<f64>> {
    read_json::<EmbeddingRecord>(path)?.to_embedding()
}

/// Latent scales as headerless CSV, one node per row.
pub fn scales_csv(e: &Embedding<f64>) -> String {
    let mut out = String::new();
    for row in e.scales().row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub subject_id: String,
    /// Absent for subjects whose response is unknown.
    #[serde(default, deserialize_with = "empty_as_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<f64>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    match s.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some(t) => t.parse().map(Some).map_err(serde::de::Error::custom),
    }
}

/// Reads `subject_id,y[,split]` with a header row; `y` may be empty.
pub fn read_responses(path: impl AsRef<Path>) -> Result<Vec<ResponseRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let row: ResponseRow = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if row.y.is_some_and(|y| !y.is_finite()) {
            return Err(Error::Parse(format!(
                "{}: non-finite response for '{}'",
                path.display(),
                row.subject_id
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn responses_csv(rows: &[ResponseRow]) -> String {
    let mut out = String::from("subject_id,y,split\n");
    for r in rows {
        let split = r.split.map_or("", Split::as_str);
        let y = r.y.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(out, "{},{},{}", r.subject_id, y, split);
    }
    out
}

/// Reads `subject_id,c1,c2,...` covariates with a header row.
pub fn read_covariates(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<f64>)>> {
    let path = path.as_ref();
    let perr = |e: &dyn std::fmt::Display| Error::Parse(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| perr(&e))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| perr(&e))?;
        let id = rec.get(0).ok_or_else(|| perr(&"empty row"))?.to_string();
        let vals = rec
            .iter()
            .skip(1)
            .map(|c| c.trim().parse::<f64>().map_err(|e| perr(&e)))
            .collect::<Result<Vec<_>>>()?;
        out.push((id, vals));
    }
    Ok(out)
}

/// Metadata stored as `meta.json` in a data-set bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub config: SimConfig,
    pub seed: u64,
    /// Active nodes, 1-indexed.
    pub active_nodes: Vec<usize>,
    pub y_center: f64,
    pub y_scale: f64,
    pub subjects: Vec<String>,
    pub mean_edge_density: f64,
}

/// A data set read back from disk.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub meta: Option<BundleMeta>,
    pub ids: Vec<String>,
    pub networks: Vec<BinaryNetwork>,
    pub responses: Vec<ResponseRow>,
}

pub const NETWORK_DIR: &str = "networks";

/// Writes `networks/<id>.csv`, `responses.csv`, `true_probs.csv` and
/// `meta.json` under `dir`.
pub fn write_bundle(dir: impl AsRef<Path>, ds: &SimDataset) -> Result<()> {
    let dir = dir.as_ref();
    let ids: Vec<String> = (0..ds.networks.len()).map(SimDataset::subject_id).collect();
    for (id, e) in ids.iter().zip(&ds.networks) {
        let net = BinaryNetwork::from_edge_set(e);
        write_text(
            dir.join(NETWORK_DIR).join(format!("{id}.csv")),
            &net.to_adjacency_csv(),
        )?;
    }
    let rows: Vec<ResponseRow> = ids
        .iter()
        .zip(ds.y.iter().zip(&ds.split))
        .map(|(id, (&y, &s))| ResponseRow {
            subject_id: id.clone(),
            y: Some(y),
            split: Some(s),
        })
        .collect();
    write_text(dir.join("responses.csv"), &responses_csv(&rows))?;
    let mut probs = String::new();
    for (id, pr) in ids.iter().zip(&ds.true_probs) {
        let cells: Vec<String> = pr.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(probs, "{id},{}", cells.join(","));
    }
    write_text(dir.join("true_probs.csv"), &probs)?;
    let density =
        ds.networks.iter().map(|e| e.density()).sum::<f64>() / ds.networks.len().max(1) as f64;
    let meta = BundleMeta {
        config: ds.config.clone(),
        seed: ds.config.seed,
        active_nodes: ds.active.iter().map(|k| k + 1).collect(),
        y_center: ds.y_center,
        y_scale: ds.y_scale,
        subjects: ids,
        mean_edge_density: density,
    };
    write_json(dir.join("meta.json"), &meta)
}

/// Reads a bundle. Without `meta.json`, subjects are the network files in
/// name order; `responses.csv` is optional.
pub fn read_bundle(dir: impl AsRef<Path>) -> Result<Bundle> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: Option<BundleMeta> = if meta_path.exists() {
        Some(read_json(&meta_path)?)
    } else {
        None
    };
    let net_dir = dir.join(NETWORK_DIR);
    let ids: Vec<String> = match &meta {
        Some(m) => m.subjects.clone(),
        None => {
            let mut ids: Vec<String> = fs::read_dir(&net_dir)
                .map_err(|e| io_err(&net_dir, e))?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
                .collect();
            ids.sort();
            ids
        }
    };
    let networks = ids
        .iter()
        .map(|id| {
            load_network(
                net_dir.join(format!("{id}.csv")),
                NetworkFormat::AdjacencyCsv,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let resp_path = dir.join("responses.csv");
    let responses = if resp_path.exists() {
        read_responses(&resp_path)?
    } else {
        Vec::new()
    };
    Ok(Bundle {
        meta,
        ids,
        networks,
        responses,
    })
}

/// Directory-relative path of a subject's embedding file.
pub fn embedding_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    pub embedding: EmbeddingRecord,
    pub covariates: Vec<f64>,
}

/// Everything needed to rebuild a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub subjects: Vec<SubjectRecord>,
    pub y: Vec<f64>,
}

impl TrainingRecord {
    pub fn from_training(t: &TrainingSet<f64>) -> Self {
        Self {
            subjects: t
                .subjects
                .iter()
                .map(|s| SubjectRecord {
                    id: s.id.clone(),
                    embedding: EmbeddingRecord::from(&s.embedding),
                    covariates: s.covariates.iter().copied().collect(),
                })
                .collect(),
            y: t.y.iter().copied().collect(),
        }
    }

    pub fn to_training(&self) -> Result<TrainingSet<f64>> {
        let subjects = self
            .subjects
            .iter()
            .map(|s| {
                Ok(Subject::new(
                    s.id.clone(),
                    s.embedding.to_embedding()?,
                    DVector::from_column_slice(&s.covariates),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        TrainingSet::new(subjects, DVector::from_column_slice(&self.y))
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn content_hash(&self) -> Result<String> {
        Ok(sha256_hex(serde_json::to_string(self)?.as_bytes()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = (s.len() - 1) as f64 * p;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            s[lo] + (h - lo as f64) * (s[hi] - s[lo])
        };
        Self {
            mean,
            sd,
            q025: q(0.025),
            q975: q(0.975),
        }
    }
}

/// Posterior summaries written into the model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub draws: usize,
    /// Acceptance rates for `(ψu, ψa, ψz)`.
    pub acceptance: [f64; 3],
    pub tau: Summary,
    pub psi1: Summary,
    pub psi_u: Summary,
    pub psi_a: Summary,
    pub psi_z: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_star: Option<Summary>,
    /// Posterior inclusion probability per node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inclusion: Option<Vec<f64>>,
}

impl ChainSummary {
    pub fn of(c: &Chains<f64>) -> Option<Self> {
        if c.is_empty() {
            return None;
        }
        let col =
            |f: fn(&Draw<f64>) -> f64| Summary::of(&c.draws.iter().map(f).collect::<Vec<_>>());
        let pi_star = c.draws[0]
            .pi_star
            .map(|_| Summary::of(&c.draws.iter().filter_map(|d| d.pi_star).collect::<Vec<_>>()));
        Some(Self {
            draws: c.len(),
            acceptance: c.acceptance,
            tau: col(|d| d.tau),
            psi1: col(|d| d.psi1),
            psi_u: col(|d| d.psi_u),
            psi_a: col(|d| d.psi_a),
            psi_z: col(|d| d.psi_z),
            pi_star,
            inclusion: c.inclusion_probabilities(),
        })
    }
}

/// One row per retained draw: `tau,psi1,psi_u,psi_a,psi_z,phi_1..phi_n`
/// and, with node selection, `beta_1..beta_p,pi_star`.
pub fn chain_csv(c: &Chains<f64>) -> String {
    let n = c.draws.first().map_or(0, |d| d.phi.len());
    let p = c
        .draws
        .first()
        .and_then(|d| d.beta.as_ref())
        .map(|b| b.len());
    let mut head: Vec<String> = ["tau", "psi1", "psi_u", "psi_a", "psi_z"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    head.extend((1..=n).map(|i| format!("phi_{i}")));
    if let Some(p) = p {
        head.extend((1..=p).map(|j| format!("beta_{j}")));
        head.push("pi_star".into());
    }
    let mut out = head.join(",");
    out.push('\n');
    for d in &c.draws {
        let mut cells: Vec<String> = [d.tau, d.psi1, d.psi_u, d.psi_a, d.psi_z]
            .iter()
            .map(|v| v.to_string())
            .collect();
        cells.extend(d.phi.iter().map(|v| v.to_string()));
        if let Some(b) = &d.beta {
            cells.extend(b.iter().map(|v| v.to_string()));
            cells.push(d.pi_star.map_or(String::new(), |v| v.to_string()));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parses [`chain_csv`] output; acceptance rates are not stored in the CSV.
pub fn parse_chain_csv(text: &str, acceptance: [f64; 3]) -> Result<Chains<f64>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("chain header: {e}")))?
        .clone();
    let n = header.iter().filter(|h| h.starts_with("phi_")).count();
    let p = header.iter().filter(|h| h.starts_with("beta_")).count();
    let selected = header.iter().any(|h| h == "pi_star");
    if header.len() != 5 + n + p + usize::from(selected) {
        return Err(Error::Parse("unexpected chain columns".into()));
    }
    let mut draws = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(format!("chain row: {e}")))?;
        let v = rec
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("chain value '{c}': {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        draws.push(Draw {
            tau: v[0],
            psi1: v[1],
            psi_u: v[2],
            psi_a: v[3],
            psi_z: v[4],
            phi: DVector::from_column_slice(&v[5..5 + n]),
            beta: selected.then(|| v[5 + n..5 + n + p].iter().map(|&b| b as u8).collect()),
            pi_star: selected.then(|| v[5 + n + p]),
        });
    }
    Ok(Chains { draws, acceptance })
}

/// Fitted model as persisted by the command-line tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub mode: FitMode,
    pub node_selection: bool,
    /// `(log τ, log ψ1, log ψu, log ψa, log ψz)` at the likelihood optimum.
    pub theta_hat: [f64; 5],
    /// The same on the natural scale.
    pub natural: [f64; 5],
    pub objective: f64,
    pub iterations: usize,
    pub status: MleStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_summary: Option<ChainSummary>,
    /// Chain CSV file name, relative to the model file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_sha256: Option<String>,
    pub priors: Priors<f64>,
    pub sampler: GibbsConfig,
    pub mle: MleConfig,
    pub seed: u64,
    pub training_sha256: String,
    pub training: TrainingRecord,
}

impl ModelFile {
    pub fn from_model(
        m: &GpModel<f64>,
        node_selection: bool,
        mle: &MleConfig,
        seed: u64,
    ) -> Result<Self> {
        let training = TrainingRecord::from_training(&m.training);
        Ok(Self {
            mode: m.mode,
            node_selection,
            theta_hat: m.theta_hat.theta,
            natural: m.theta_hat.natural(),
            objective: m.mle.objective(),
            iterations: m.mle.iterations,
            status: m.mle.status,
            chain_summary: m.chains.as_ref().and_then(ChainSummary::of),
            chain_file: None,
            chain_sha256: None,
            priors: m.priors,
            sampler: m.sampler.clone(),
            mle: mle.clone(),
            seed,
            training_sha256: training.content_hash()?,
            training,
        })
    }

    /// Rebuilds the model; MCMC models need their chains.
    pub fn to_model(&self, chains: Option<Chains<f64>>) -> Result<GpModel<f64>> {
        let training = self.training.to_training()?;
        if training.len() != self.training.y.len()
            || self.training.content_hash()? != self.training_sha256
        {
            return Err(Error::Parse(
                "training data does not match its recorded hash".into(),
            ));
        }
        if self.mode == FitMode::Mcmc && chains.is_none() {
            return Err(Error::InvalidArgument(
                "MCMC model requires its chain file".into(),
            ));
        }
        let theta = GpHyperparams::new(self.theta_hat)?;
        Ok(GpModel {
            training,
            mode: self.mode,
            theta_hat: theta,
            mle: MleFit {
                theta,
                trace: vec![self.objective],
                iterations: self.iterations,
                status: self.status,
            },
            chains,
            priors: self.priors,
            sampler: self.sampler.clone(),
        })
    }
}

/// `subject_id,mean,lower95,upper95`.
pub fn prediction_csv(ids: &[String], p: &Prediction<f64>) -> String {
    let mut out = String::from("subject_id,mean,lower95,upper95\n");
    for (i, id) in ids.iter().enumerate() {
        let _ = writeln!(out, "{id},{},{},{}", p.mean[i], p.lower[i], p.upper[i]);
    }
    out
}

/// Appends one report row, writing the header first when the file is new.
pub fn append_eval_csv(path: impl AsRef<Path>, report: &EvalReport) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let fresh = !path.exists();
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(EvalReport::CSV_HEADER);
        text.push('\n');
    }
    text.push_str(&report.csv_row());
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}
