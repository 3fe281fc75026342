use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lsgpr::sim::Method;
use lsgpr_cli::config::{InputFormat, SplitFilter};
use lsgpr_cli::{
    cmd_benchmark, cmd_embed, cmd_fit, cmd_predict, cmd_simulate, CliError, CommonArgs, RunConfig,
};

/// Regression on network-valued covariates via latent-scale embeddings and
/// Gaussian processes.
#[derive(Parser)]
#[command(name = "lsgpr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct FitInputs {
    /// Directory of per-subject embedding JSON files.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// CSV with subject_id,y[,split].
    #[arg(long)]
    responses: Option<PathBuf>,
    /// CSV with subject_id followed by covariate columns.
    #[arg(long)]
    covariates: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a data set and write it as a bundle.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
    },
    /// Embed every network of a bundle or a list of files.
    Embed {
        #[command(flatten)]
        common: CommonArgs,
        /// Bundle directory.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Network files; subject ids are the file stems.
        #[arg(long, num_args = 1..)]
        networks: Vec<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
    },
    /// Fit the regression model on training subjects.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        inputs: FitInputs,
    },
    /// Fit with node indicators and report inclusion probabilities.
    Select {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        inputs: FitInputs,
    },
    /// Predict responses for new subjects from a fitted model.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        inputs: FitInputs,
        /// Model file written by `fit` or `select`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Rows of the responses file to predict.
        #[arg(long, value_enum)]
        split: Option<SplitFilter>,
    },
    /// Run the simulation comparison over a grid of settings.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        replicates: Option<usize>,
        /// Comma-separated subset of ls-gpr1, ls-gpr2, ridge, pca-gpr.
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        methods: Option<Vec<Method>>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method '{s}'"))
}

fn apply_fit_inputs(cfg: &mut RunConfig, i: FitInputs) {
    if i.embeddings.is_some() {
        cfg.inputs.embeddings = i.embeddings;
    }
    if i.responses.is_some() {
        cfg.inputs.responses = i.responses;
    }
    if i.covariates.is_some() {
        cfg.inputs.covariates = i.covariates;
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            common,
            n_train,
            n_test,
        } => {
            let mut cfg = common.load()?;
            if let Some(v) = n_train {
                cfg.sim.n_train = v;
            }
            if let Some(v) = n_test {
                cfg.sim.n_test = v;
            }
            cmd_simulate(&cfg, &common.out).map(drop)
        }
        Command::Embed {
            common,
            input,
            networks,
            format,
        } => {
            let mut cfg = common.load()?;
            if input.is_some() {
                cfg.inputs.bundle = input;
            }
            if !networks.is_empty() {
                cfg.inputs.networks = networks;
                cfg.inputs.bundle = None;
            }
            if let Some(f) = format {
                cfg.inputs.format = f;
            }
            cmd_embed(&cfg, &common.out).map(drop)
        }
        Command::Fit { common, inputs } => {
            let mut cfg = common.load()?;
            apply_fit_inputs(&mut cfg, inputs);
            cmd_fit(&cfg, &common.out, false).map(drop)
        }
        Command::Select { common, inputs } => {
            let mut cfg = common.load()?;
            apply_fit_inputs(&mut cfg, inputs);
            cmd_fit(&cfg, &common.out, true).map(drop)
        }
        Command::Predict {
            common,
            inputs,
            model,
            split,
        } => {
            let mut cfg = common.load()?;
            apply_fit_inputs(&mut cfg, inputs);
            if model.is_some() {
                cfg.inputs.model = model;
            }
            if let Some(s) = split {
                cfg.inputs.split = s;
            }
            cmd_predict(&cfg, &common.out).map(drop)
        }
        Command::Benchmark {
            common,
            replicates,
            methods,
        } => {
            let mut cfg = common.load()?;
            if let Some(r) = replicates {
                cfg.benchmark.replicates = r;
            }
            if let Some(m) = methods {
                cfg.benchmark.methods = m;
            }
            cmd_benchmark(&cfg, &common.out).map(drop)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
