//! One function per subcommand. Each reads its inputs, calls the library and
//! writes its outputs plus `run.json`; none transforms the numbers itself.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use lsgpr::embed::Embedding;
use lsgpr::gp::{FitMode, GpModel, Subject, TrainingSet};
use lsgpr::io::{
    append_eval_csv, chain_csv, embedding_path, parse_chain_csv, prediction_csv, read_bundle,
    read_covariates, read_embedding, read_json, read_responses, read_text, sha256_hex,
    write_bundle, write_embedding, write_json, write_text, ModelFile, ResponseRow,
};
use lsgpr::network::load_network;
use lsgpr::rng::{derive_rng, sub_seed};
use lsgpr::sim::{
    embed_one, evaluate, generate_scenario1, run_replicate, Method, MethodResult, ReplicateConfig,
    SimConfig, SimDataset, Split, GP_STREAM,
};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::config::{Cell, RunConfig};
use crate::CliError;

/// RNG stream for posterior-predictive draws in `predict`.
pub const PREDICT_STREAM: u64 = GP_STREAM + 1;

pub const RUN_FILE: &str = "run.json";
pub const MODEL_FILE: &str = "model.json";
pub const CHAIN_FILE: &str = "chains.csv";

fn record(out: &Path, command: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let cfg = RunConfig {
        command: Some(command.into()),
        ..cfg.clone()
    };
    Ok(write_json(out.join(RUN_FILE), &cfg)?)
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf, CliError> {
    p.as_ref()
        .ok_or_else(|| CliError::Validation(format!("missing input: {flag}")))
}

/// Generates a simulated data set and writes it as a bundle.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<SimDataset, CliError> {
    let ds = generate_scenario1(&cfg.sim)?;
    write_bundle(out, &ds)?;
    record(out, "simulate", cfg)?;
    let density = ds.networks.iter().map(|e| e.density()).sum::<f64>() / ds.networks.len() as f64;
    println!(
        "subjects {} (train {}, test {}), nodes {}, active nodes {}, mean edge density {:.4}",
        ds.networks.len(),
        cfg.sim.n_train,
        cfg.sim.n_test,
        cfg.sim.p,
        ds.active.len(),
        density
    );
    Ok(ds)
}

/// Per-subject outcome of `embed`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbedRow {
    pub subject_id: String,
    pub outcome: Result<(usize, bool, f64), String>,
}

/// Embeds every subject of a bundle or a list of network files. Subject `i`
/// uses RNG stream `i` of the seed, so the result does not depend on
/// scheduling. Failures are listed in the manifest and reported at the end.
pub fn cmd_embed(cfg: &RunConfig, out: &Path) -> Result<Vec<EmbedRow>, CliError> {
    cfg.em.validate()?;
    let (ids, networks) = if let Some(dir) = &cfg.inputs.bundle {
        let b = read_bundle(dir)?;
        (b.ids, b.networks)
    } else if !cfg.inputs.networks.is_empty() {
        let format = cfg.inputs.network_format()?;
        let ids = cfg
            .inputs
            .networks
            .iter()
            .map(|p| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect();
        let nets = cfg
            .inputs
            .networks
            .iter()
            .map(|p| load_network(p, format))
            .collect::<lsgpr::Result<Vec<_>>>()?;
        (ids, nets)
    } else {
        return Err(CliError::Validation(
            "missing input: --input or --networks".into(),
        ));
    };

    let fits: Vec<_> = networks
        .par_iter()
        .enumerate()
        .map(|(i, net)| embed_one(&net.edge_vector(), &cfg.em, cfg.seed, i))
        .collect();

    let mut rows = Vec::with_capacity(ids.len());
    let mut manifest = csv::Writer::from_writer(Vec::new());
    manifest
        .write_record([
            "subject_id",
            "status",
            "iterations",
            "converged",
            "final_log_posterior",
        ])
        .map_err(csv_err)?;
    for (id, fit) in ids.iter().zip(fits) {
        let outcome = match fit {
            Ok(f) => {
                write_embedding(embedding_path(out, id), &f.embedding)?;
                let lp = f.final_log_posterior();
                manifest
                    .write_record([
                        id.as_str(),
                        "ok",
                        &f.iterations.to_string(),
                        &f.converged.to_string(),
                        &lp.to_string(),
                    ])
                    .map_err(csv_err)?;
                if !f.converged {
                    warn!(
                        "{id}: stopped after {} iterations without converging",
                        f.iterations
                    );
                }
                Ok((f.iterations, f.converged, lp))
            }
            Err(e) => {
                manifest
                    .write_record([id.as_str(), &format!("error: {e}"), "", "", ""])
                    .map_err(csv_err)?;
                Err(e.to_string())
            }
        };
        rows.push(EmbedRow {
            subject_id: id.clone(),
            outcome,
        });
    }
    let text = String::from_utf8(
        manifest
            .into_inner()
            .map_err(|e| CliError::Validation(e.to_string()))?,
    )
    .expect("csv output is utf-8");
    write_text(out.join("manifest.csv"), &text)?;
    record(out, "embed", cfg)?;

    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    let unconverged = rows
        .iter()
        .filter(|r| matches!(r.outcome, Ok((_, false, _))))
        .count();
    println!(
        "embedded {} of {} subjects ({} not converged)",
        rows.len() - failed,
        rows.len(),
        unconverged
    );
    if failed > 0 {
        return Err(CliError::Numerical(format!(
            "{failed} of {} subjects failed to embed",
            rows.len()
        )));
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Validation(e.to_string())
}

fn load_covariates(path: &Option<PathBuf>) -> Result<Option<HashMap<String, Vec<f64>>>, CliError> {
    path.as_ref()
        .map(|p| Ok(read_covariates(p)?.into_iter().collect()))
        .transpose()
}

/// Subjects for the given ids, read from the embedding directory.
fn load_subjects(
    ids: &[&str],
    dir: &Path,
    covariates: Option<&HashMap<String, Vec<f64>>>,
) -> Result<Vec<Subject<f64>>, CliError> {
    ids.iter()
        .map(|&id| {
            let path = embedding_path(dir, id);
            if !path.exists() {
                return Err(CliError::Validation(format!(
                    "no embedding for subject '{id}' ({})",
                    path.display()
                )));
            }
            let emb: Embedding<f64> = read_embedding(&path)?;
            let z = match covariates {
                None => Vec::new(),
                Some(map) => map.get(id).cloned().ok_or_else(|| {
                    CliError::Validation(format!("no covariates for subject '{id}'"))
                })?,
            };
            Ok(Subject::new(id, emb, DVector::from_vec(z)))
        })
        .collect()
}

fn training_set(cfg: &RunConfig) -> Result<TrainingSet<f64>, CliError> {
    let rows = read_responses(require(&cfg.inputs.responses, "--responses")?)?;
    let rows: Vec<&ResponseRow> = rows
        .iter()
        .filter(|r| r.split != Some(Split::Test))
        .collect();
    if rows.is_empty() {
        return Err(CliError::Validation("no training responses".into()));
    }
    let y = rows
        .iter()
        .map(|r| {
            r.y.ok_or_else(|| {
                CliError::Validation(format!("missing response for subject '{}'", r.subject_id))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ids: Vec<&str> = rows.iter().map(|r| r.subject_id.as_str()).collect();
    let covs = load_covariates(&cfg.inputs.covariates)?;
    let subjects = load_subjects(
        &ids,
        require(&cfg.inputs.embeddings, "--embeddings")?,
        covs.as_ref(),
    )?;
    Ok(TrainingSet::new(subjects, DVector::from_vec(y))?)
}

/// Fits the regression model; with `select`, runs the sampler with node
/// indicators and also writes `inclusion.csv`.
pub fn cmd_fit(cfg: &RunConfig, out: &Path, select: bool) -> Result<ModelFile, CliError> {
    let training = training_set(cfg)?;
    let mut rng = derive_rng(cfg.seed, GP_STREAM);
    let model = if select {
        GpModel::fit_node_selection(
            training,
            &cfg.mle,
            cfg.priors,
            cfg.sampler.clone(),
            &mut rng,
        )?
    } else {
        GpModel::fit(
            training,
            cfg.mode,
            &cfg.mle,
            cfg.priors,
            cfg.sampler.clone(),
            &mut rng,
        )?
    };
    let mut file = ModelFile::from_model(&model, select, &cfg.mle, cfg.seed)?;
    if let Some(chains) = &model.chains {
        let text = chain_csv(chains);
        file.chain_file = Some(CHAIN_FILE.into());
        file.chain_sha256 = Some(sha256_hex(text.as_bytes()));
        write_text(out.join(CHAIN_FILE), &text)?;
        if let Some(incl) = chains.inclusion_probabilities() {
            let mut s = String::from("node,inclusion_probability\n");
            for (j, v) in incl.iter().enumerate() {
                let _ = writeln!(s, "{},{v}", j + 1);
            }
            write_text(out.join("inclusion.csv"), &s)?;
        }
    }
    write_json(out.join(MODEL_FILE), &file)?;
    record(out, if select { "select" } else { "fit" }, cfg)?;

    let [tau, psi1, psi_u, psi_a, psi_z] = file.natural;
    println!(
        "mle objective {:.6} after {} iterations ({:?}); tau {tau:.4} psi1 {psi1:.4} psi_u {psi_u:.4e} psi_a {psi_a:.4e} psi_z {psi_z:.4e}",
        file.objective, file.iterations, file.status
    );
    if let Some(s) = &file.chain_summary {
        println!(
            "{} draws retained; acceptance psi_u {:.3} psi_a {:.3} psi_z {:.3}",
            s.draws, s.acceptance[0], s.acceptance[1], s.acceptance[2]
        );
    }
    Ok(file)
}

/// Reloads a model file and its chains, checking the chain hash.
pub fn load_model(path: &Path) -> Result<GpModel<f64>, CliError> {
    let file: ModelFile = read_json(path)?;
    let chains = match &file.chain_file {
        None => None,
        Some(name) => {
            let chain_path = path.parent().unwrap_or(Path::new(".")).join(name);
            let text = read_text(&chain_path)?;
            if file.chain_sha256.as_deref() != Some(sha256_hex(text.as_bytes()).as_str()) {
                return Err(CliError::Validation(format!(
                    "{} does not match the model's hash",
                    chain_path.display()
                )));
            }
            let acceptance = file
                .chain_summary
                .as_ref()
                .map_or([0.0; 3], |s| s.acceptance);
            Some(parse_chain_csv(&text, acceptance)?)
        }
    };
    Ok(file.to_model(chains)?)
}

/// Predicts for the selected rows of the responses file and, when every row
/// carries a response, scores the predictions.
pub fn cmd_predict(
    cfg: &RunConfig,
    out: &Path,
) -> Result<Option<lsgpr::sim::EvalReport>, CliError> {
    let model = load_model(require(&cfg.inputs.model, "--model")?)?;
    let rows = read_responses(require(&cfg.inputs.responses, "--responses")?)?;
    let rows: Vec<&ResponseRow> = rows
        .iter()
        .filter(|r| cfg.inputs.split.keeps(r.split))
        .collect();
    let ids: Vec<String> = rows.iter().map(|r| r.subject_id.clone()).collect();
    let report = if rows.is_empty() {
        write_text(
            out.join("predictions.csv"),
            &prediction_csv(&[], &empty_prediction()),
        )?;
        None
    } else {
        let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let covs = load_covariates(&cfg.inputs.covariates)?;
        let test = load_subjects(
            &id_refs,
            require(&cfg.inputs.embeddings, "--embeddings")?,
            covs.as_ref(),
        )?;
        let mut rng = derive_rng(cfg.seed, PREDICT_STREAM);
        let pred = model.predict(&test, &mut rng)?;
        write_text(out.join("predictions.csv"), &prediction_csv(&ids, &pred))?;
        let truth: Option<Vec<f64>> = rows.iter().map(|r| r.y).collect();
        match truth {
            Some(t) => {
                let intervals = (pred.lower.as_slice(), pred.upper.as_slice());
                let r = evaluate(pred.mean.as_slice(), Some(intervals), &t)?;
                write_json(out.join("eval.json"), &r)?;
                append_eval_csv(out.join("eval.csv"), &r)?;
                println!(
                    "mse {:.6} coverage {:.4} width {:.4}",
                    r.mse,
                    r.coverage.unwrap_or(f64::NAN),
                    r.width.unwrap_or(f64::NAN)
                );
                Some(r)
            }
            None => {
                info!("responses incomplete; skipping evaluation");
                None
            }
        }
    };
    record(out, "predict", cfg)?;
    println!(
        "predicted {} subjects ({} model)",
        ids.len(),
        mode_name(model.mode)
    );
    Ok(report)
}

fn mode_name(m: FitMode) -> &'static str {
    match m {
        FitMode::Mle => "mle",
        FitMode::Mcmc => "mcmc",
    }
}

fn empty_prediction() -> lsgpr::gp::Prediction<f64> {
    lsgpr::gp::Prediction {
        mean: DVector::zeros(0),
        lower: DVector::zeros(0),
        upper: DVector::zeros(0),
    }
}

/// One benchmark replicate's outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateOutcome {
    pub cell: usize,
    pub replicate: usize,
    pub seed: u64,
    pub results: Result<Vec<MethodResult>, String>,
}

/// Seed of replicate `r` in cell `c`.
pub fn replicate_seed(master: u64, cell: usize, replicate: usize) -> u64 {
    sub_seed(master, ((cell as u64) << 32) | replicate as u64)
}

/// Simulates, embeds and scores one replicate.
pub fn run_benchmark_replicate(
    cfg: &RunConfig,
    cell: Cell,
    seed: u64,
) -> lsgpr::Result<Vec<MethodResult>> {
    let sim = SimConfig {
        d0: cell.d0,
        sparsity: cell.sparsity,
        seed,
        ..cfg.sim.clone()
    };
    let ds = generate_scenario1(&sim)?;
    let methods = &cfg.benchmark.methods;
    let embeddings: Vec<Embedding<f64>> = if methods
        .iter()
        .any(|m| matches!(m, Method::LsGpr1 | Method::LsGpr2))
    {
        ds.networks
            .par_iter()
            .enumerate()
            .map(|(i, e)| embed_one(e, &cfg.em, seed, i).map(|f| f.embedding))
            .collect::<lsgpr::Result<_>>()?
    } else {
        Vec::new()
    };
    let rep = ReplicateConfig {
        em: cfg.em.clone(),
        mle: cfg.mle.clone(),
        sampler: cfg.sampler.clone(),
        priors: cfg.priors,
        methods: methods.clone(),
        pca_components: cfg.benchmark.pca_components,
    };
    run_replicate(&ds, &embeddings, &rep, seed)
}

fn benchmark_cells(cfg: &RunConfig) -> Vec<Cell> {
    if cfg.benchmark.cells.is_empty() {
        vec![Cell {
            d0: cfg.sim.d0,
            sparsity: cfg.sim.sparsity,
        }]
    } else {
        cfg.benchmark.cells.clone()
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Runs every (cell, replicate) pair in parallel and writes per-replicate
/// results, per-cell aggregates and any failures.
pub fn cmd_benchmark(cfg: &RunConfig, out: &Path) -> Result<Vec<ReplicateOutcome>, CliError> {
    let bench = &cfg.benchmark;
    if bench.replicates == 0 {
        return Err(CliError::Validation("replicates must be at least 1".into()));
    }
    if bench.methods.is_empty() {
        return Err(CliError::Validation("no methods selected".into()));
    }
    cfg.em.validate()?;
    cfg.mle.validate()?;
    cfg.sampler.validate()?;
    cfg.priors.validate()?;
    let cells = benchmark_cells(cfg);
    for c in &cells {
        SimConfig {
            d0: c.d0,
            sparsity: c.sparsity,
            ..cfg.sim.clone()
        }
        .validate()?;
    }

    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..bench.replicates).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<ReplicateOutcome> = tasks
        .par_iter()
        .map(|&(c, r)| {
            let seed = replicate_seed(cfg.seed, c, r);
            let results = run_benchmark_replicate(cfg, cells[c], seed).map_err(|e| e.to_string());
            ReplicateOutcome {
                cell: c,
                replicate: r,
                seed,
                results,
            }
        })
        .collect();

    let mut results = String::from("cell,d0,sparsity,replicate,seed,method,mse,coverage,width\n");
    let mut failures = String::from("cell,d0,sparsity,replicate,seed,error\n");
    for o in &outcomes {
        let cell = cells[o.cell];
        match &o.results {
            Ok(rs) => {
                for m in rs {
                    let r = &m.report;
                    let _ = writeln!(
                        results,
                        "{},{},{},{},{},{},{},{},{}",
                        o.cell,
                        cell.d0,
                        cell.sparsity,
                        o.replicate,
                        o.seed,
                        m.method.name(),
                        r.mse,
                        opt(r.coverage),
                        opt(r.width)
                    );
                }
            }
            Err(e) => {
                let msg = e.replace(['"', '\n'], " ");
                let _ = writeln!(
                    failures,
                    "{},{},{},{},{},\"{msg}\"",
                    o.cell, cell.d0, cell.sparsity, o.replicate, o.seed
                );
            }
        }
    }

    let mut agg = String::from(
        "cell,d0,sparsity,method,replicates,mse_mean,mse_sd,coverage_mean,coverage_sd,width_mean,width_sd\n",
    );
    println!(
        "{:>4} {:>4} {:>8} {:>8} {:>4} {:>10} {:>10} {:>9} {:>8}",
        "cell", "d0", "sparsity", "method", "n", "mse", "mse_sd", "coverage", "width"
    );
    for (c, cell) in cells.iter().enumerate() {
        for &method in &bench.methods {
            let reports: Vec<_> = outcomes
                .iter()
                .filter(|o| o.cell == c)
                .filter_map(|o| o.results.as_ref().ok())
                .flat_map(|rs| rs.iter().filter(|m| m.method == method).map(|m| m.report))
                .collect();
            if reports.is_empty() {
                continue;
            }
            let (mse, mse_sd) = mean_sd(&reports.iter().map(|r| r.mse).collect::<Vec<_>>());
            let cov: Option<Vec<f64>> = reports.iter().map(|r| r.coverage).collect();
            let wid: Option<Vec<f64>> = reports.iter().map(|r| r.width).collect();
            let (cm, cs) = cov.as_deref().map(mean_sd).unzip();
            let (wm, ws) = wid.as_deref().map(mean_sd).unzip();
            let _ = writeln!(
                agg,
                "{c},{},{},{},{},{mse},{mse_sd},{},{},{},{}",
                cell.d0,
                cell.sparsity,
                method.name(),
                reports.len(),
                opt(cm),
                opt(cs),
                opt(wm),
                opt(ws)
            );
            println!(
                "{c:>4} {:>4} {:>8} {:>8} {:>4} {mse:>10.5} {mse_sd:>10.5} {:>9} {:>8}",
                cell.d0,
                cell.sparsity,
                method.name(),
                reports.len(),
                cm.map_or("-".into(), |v| format!("{v:.3}")),
                wm.map_or("-".into(), |v| format!("{v:.3}"))
            );
        }
    }
    write_text(out.join("results.csv"), &results)?;
    write_text(out.join("aggregate.csv"), &agg)?;
    record(out, "benchmark", cfg)?;

    let failed = outcomes.iter().filter(|o| o.results.is_err()).count();
    if failed > 0 {
        write_text(out.join("failures.csv"), &failures)?;
        return Err(CliError::Partial(format!(
            "{failed} of {} replicates failed; see failures.csv",
            outcomes.len()
        )));
    }
    Ok(outcomes)
}
