//! Run configuration: a JSON file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use lsgpr::embed::EmConfig;
use lsgpr::gp::{FitMode, GibbsConfig, MleConfig, Priors};
use lsgpr::io::read_json;
use lsgpr::network::NetworkFormat;
use lsgpr::sim::{Method, SimConfig, Split};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// `p` rows of `p` comma-separated 0/1 entries.
    #[default]
    Adjacency,
    /// 1-indexed `k,l` pairs; needs `--nodes`.
    EdgeList,
}

/// Which rows of a responses file a command uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitFilter {
    Train,
    #[default]
    Test,
    All,
}

impl SplitFilter {
    /// Rows without a split label always pass.
    pub fn keeps(self, split: Option<Split>) -> bool {
        match (self, split) {
            (SplitFilter::All, _) | (_, None) => true,
            (SplitFilter::Train, Some(s)) => s == Split::Train,
            (SplitFilter::Test, Some(s)) => s == Split::Test,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Inputs {
    /// Data-set bundle directory.
    pub bundle: Option<PathBuf>,
    /// Individual network files; subject ids are the file stems.
    pub networks: Vec<PathBuf>,
    pub format: InputFormat,
    /// Node count for edge-list input.
    pub nodes: Option<usize>,
    /// Directory of per-subject embedding JSON files.
    pub embeddings: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Rows of the responses file used by `predict`.
    pub split: SplitFilter,
}

impl Inputs {
    pub fn network_format(&self) -> Result<NetworkFormat, CliError> {
        match self.format {
            InputFormat::Adjacency => Ok(NetworkFormat::AdjacencyCsv),
            InputFormat::EdgeList => match self.nodes {
                Some(nodes) => Ok(NetworkFormat::EdgeListCsv { nodes }),
                None => Err(CliError::Validation("edge-list input needs --nodes".into())),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub d0: usize,
    pub sparsity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    /// Grid cells; empty means the single cell given by the simulation config.
    pub cells: Vec<Cell>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    /// Principal components for the PCA baseline; `None` uses the default rule.
    pub pca_components: Option<usize>,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            cells: Vec::new(),
            replicates: 10,
            methods: Method::ALL.to_vec(),
            pca_components: None,
        }
    }
}

/// Everything a command needs. Written as `run.json` next to every output so
/// a run can be repeated with `--config run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Set by the command that wrote the file; ignored on input.
    pub command: Option<String>,
    /// Master seed; the simulation seed follows it.
    pub seed: u64,
    pub mode: FitMode,
    pub sim: SimConfig,
    pub em: EmConfig<f64>,
    pub mle: MleConfig,
    pub sampler: GibbsConfig,
    pub priors: Priors<f64>,
    pub inputs: Inputs,
    pub benchmark: BenchmarkSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 0,
            mode: FitMode::Mle,
            sim: SimConfig::default(),
            em: EmConfig::default(),
            mle: MleConfig::default(),
            sampler: GibbsConfig::default(),
            priors: Priors::default(),
            inputs: Inputs::default(),
            benchmark: BenchmarkSpec::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Mle,
    Mcmc,
}

impl From<ModeArg> for FitMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Mle => FitMode::Mle,
            ModeArg::Mcmc => FitMode::Mcmc,
        }
    }
}

/// Flags shared by every command. Each one, when given, overrides the
/// corresponding field of the configuration file.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct CommonArgs {
    /// JSON configuration file; flags take precedence over its values.
    #[arg(long, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Nodes per network (simulation, and edge-list input).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Latent dimension of the fitted embeddings, pinned column included.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Latent dimension used to simulate networks.
    #[arg(long)]
    pub d0: Option<usize>,
    /// Fraction of nodes whose edges drive the simulated response.
    #[arg(long)]
    pub sparsity: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Sampler iterations, burn-in included.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
}

impl CommonArgs {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => read_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.nodes {
            cfg.sim.p = v;
            cfg.inputs.nodes = Some(v);
        }
        if let Some(v) = self.dim {
            cfg.em.dim = v;
        }
        if let Some(v) = self.d0 {
            cfg.sim.d0 = v;
        }
        if let Some(v) = self.sparsity {
            cfg.sim.sparsity = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v.into();
        }
        if let Some(v) = self.iters {
            cfg.sampler.iterations = v;
        }
        if let Some(v) = self.burnin {
            cfg.sampler.burn_in = v;
        }
        cfg.sim.seed = cfg.seed;
        Ok(cfg)
    }
}

fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    read_json(path).map_err(|e| CliError::Validation(format!("config: {e}")))
}
