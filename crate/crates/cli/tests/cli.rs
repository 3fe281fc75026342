use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lsgpr::io::{read_bundle, read_embedding, read_json, sha256_hex, ModelFile};
use lsgpr::rng::derive_rng;
use lsgpr::sim::{embed_one, generate_scenario1, SimConfig, GP_STREAM};
use lsgpr_cli::commands::load_model;
use lsgpr_cli::RunConfig;

fn lsgpr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsgpr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = lsgpr(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str], cwd: &Path) -> i32 {
    lsgpr(args, cwd).status.code().unwrap()
}

/// Hash of every file under `dir` except the run record, in path order.
fn tree_hash(dir: &Path) -> String {
    fn walk(d: &Path, acc: &mut Vec<PathBuf>) {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, acc)
            } else {
                acc.push(p)
            }
        }
    }
    let mut files = Vec::new();
    walk(dir, &mut files);
    files.sort();
    let mut all = Vec::new();
    for f in files.iter().filter(|f| !f.ends_with("run.json")) {
        all.extend(f.strip_prefix(dir).unwrap().to_string_lossy().bytes());
        all.extend(fs::read(f).unwrap());
    }
    sha256_hex(&all)
}

fn small_pipeline(dir: &Path) {
    ok(
        &[
            "simulate",
            "--nodes",
            "12",
            "--d0",
            "2",
            "--sparsity",
            "0.5",
            "--seed",
            "3",
            "--n-train",
            "15",
            "--n-test",
            "6",
            "--out",
            "data",
        ],
        dir,
    );
    ok(
        &[
            "embed", "--input", "data", "--dim", "3", "--seed", "3", "--out", "emb",
        ],
        dir,
    );
}

#[test]
fn simulate_writes_full_bundle_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "simulate",
        "--nodes",
        "40",
        "--d0",
        "5",
        "--sparsity",
        "0.5",
        "--seed",
        "7",
    ];
    ok(&[&args[..], &["--out", "a"]].concat(), d);
    ok(&[&args[..], &["--out", "b"]].concat(), d);
    let b = read_bundle(d.join("a")).unwrap();
    assert_eq!(b.ids.len(), 100);
    assert_eq!(b.responses.len(), 100);
    assert_eq!(tree_hash(&d.join("a")), tree_hash(&d.join("b")));

    // the command adds nothing to the library output
    let cfg = SimConfig {
        p: 40,
        d0: 5,
        sparsity: 0.5,
        seed: 7,
        ..SimConfig::default()
    };
    let ds = generate_scenario1(&cfg).unwrap();
    for (net, e) in b.networks.iter().zip(&ds.networks) {
        assert_eq!(&net.edge_vector(), e);
    }
    let y: Vec<f64> = b.responses.iter().map(|r| r.y.unwrap()).collect();
    assert_eq!(y, ds.y);
    let meta = b.meta.unwrap();
    assert_eq!(
        meta.active_nodes,
        ds.active.iter().map(|k| k + 1).collect::<Vec<_>>()
    );
    assert_eq!(meta.seed, 7);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&["simulate", "--sparsity", "1.5", "--out", "x"], d), 1);
    assert_eq!(code(&["simulate", "--bogus-flag", "--out", "x"], d), 1);
    ok(
        &[
            "simulate",
            "--nodes",
            "6",
            "--d0",
            "2",
            "--n-train",
            "4",
            "--n-test",
            "2",
            "--out",
            "data",
        ],
        d,
    );
    assert_eq!(
        code(&["embed", "--input", "data", "--dim", "1", "--out", "e"], d),
        1
    );
    assert_eq!(
        code(
            &[
                "fit",
                "--embeddings",
                "nowhere",
                "--responses",
                "data/responses.csv",
                "--out",
                "m"
            ],
            d
        ),
        1
    );
    assert_eq!(
        code(&["fit", "--embeddings", "nowhere", "--out", "m"], d),
        1
    );
    assert_eq!(
        code(&["benchmark", "--replicates", "0", "--out", "b"], d),
        1
    );
    assert!(lsgpr(&["--help"], d).status.success());
}

#[test]
fn embed_manifest_and_library_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_pipeline(d);
    let manifest = fs::read_to_string(d.join("emb/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 1 + 21);
    assert!(manifest
        .lines()
        .next()
        .unwrap()
        .contains("final_log_posterior"));

    let cfg: RunConfig = read_json(d.join("emb/run.json")).unwrap();
    assert_eq!(cfg.em.dim, 3);
    let b = read_bundle(d.join("data")).unwrap();
    for i in [0, 9, 20] {
        let direct = embed_one(&b.networks[i].edge_vector(), &cfg.em, 3, i).unwrap();
        let written = read_embedding(d.join(format!("emb/{}.json", b.ids[i]))).unwrap();
        assert_eq!(written, direct.embedding);
    }
}

#[test]
fn fit_and_predict_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_pipeline(d);
    let fit = |mode: &str, out: &str| {
        ok(
            &[
                "fit",
                "--embeddings",
                "emb",
                "--responses",
                "data/responses.csv",
                "--mode",
                mode,
                "--iters",
                "120",
                "--burnin",
                "40",
                "--seed",
                "5",
                "--out",
                out,
            ],
            d,
        )
    };
    fit("mle", "mle");
    let m: ModelFile = read_json(d.join("mle/model.json")).unwrap();
    assert!(m.objective.is_finite() && m.iterations > 0);
    assert!(m.chain_file.is_none());

    fit("mcmc", "mc1");
    fit("mcmc", "mc2");
    let chains = fs::read_to_string(d.join("mc1/chains.csv")).unwrap();
    assert_eq!(chains.lines().count(), 1 + 80);
    assert_eq!(
        chains,
        fs::read_to_string(d.join("mc2/chains.csv")).unwrap()
    );

    // prediction through the binary equals prediction in process
    ok(
        &[
            "predict",
            "--model",
            "mc1/model.json",
            "--embeddings",
            "emb",
            "--responses",
            "data/responses.csv",
            "--seed",
            "5",
            "--out",
            "pred",
        ],
        d,
    );
    let model = load_model(&d.join("mc1/model.json")).unwrap();
    let b = read_bundle(d.join("data")).unwrap();
    let test: Vec<_> = b.ids[15..]
        .iter()
        .map(|id| {
            lsgpr::gp::Subject::new(
                id.clone(),
                read_embedding(d.join(format!("emb/{id}.json"))).unwrap(),
                nalgebra::DVector::zeros(0),
            )
        })
        .collect();
    let direct = model
        .predict(&test, &mut derive_rng(5, GP_STREAM + 1))
        .unwrap();
    let text = fs::read_to_string(d.join("pred/predictions.csv")).unwrap();
    for (i, line) in text.lines().skip(1).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], b.ids[15 + i]);
        assert_eq!(cells[1].parse::<f64>().unwrap(), direct.mean[i]);
        assert_eq!(cells[2].parse::<f64>().unwrap(), direct.lower[i]);
        assert_eq!(cells[3].parse::<f64>().unwrap(), direct.upper[i]);
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("pred/eval.json")).unwrap()).unwrap();
    for key in ["mse", "coverage", "width"] {
        assert!(report[key].is_f64(), "{key}");
    }

    // no test rows: header only
    fs::write(
        d.join("train_only.csv"),
        "subject_id,y,split\ns001,0.5,train\n",
    )
    .unwrap();
    ok(
        &[
            "predict",
            "--model",
            "mc1/model.json",
            "--embeddings",
            "emb",
            "--responses",
            "train_only.csv",
            "--out",
            "empty",
        ],
        d,
    );
    assert_eq!(
        fs::read_to_string(d.join("empty/predictions.csv")).unwrap(),
        "subject_id,mean,lower95,upper95\n"
    );

    // test embeddings of another dimension are rejected
    ok(
        &[
            "embed", "--input", "data", "--dim", "4", "--seed", "3", "--out", "emb4",
        ],
        d,
    );
    assert_eq!(
        code(
            &[
                "predict",
                "--model",
                "mc1/model.json",
                "--embeddings",
                "emb4",
                "--responses",
                "data/responses.csv",
                "--out",
                "bad"
            ],
            d
        ),
        1
    );

    // a tampered chain file is refused
    fs::write(d.join("mc2/chains.csv"), chains.replacen('1', "2", 1)).unwrap();
    assert_eq!(
        code(
            &[
                "predict",
                "--model",
                "mc2/model.json",
                "--embeddings",
                "emb",
                "--responses",
                "data/responses.csv",
                "--out",
                "bad2"
            ],
            d
        ),
        1
    );
}

#[test]
fn select_writes_inclusion_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_pipeline(d);
    ok(
        &[
            "select",
            "--embeddings",
            "emb",
            "--responses",
            "data/responses.csv",
            "--iters",
            "60",
            "--burnin",
            "10",
            "--out",
            "sel",
        ],
        d,
    );
    let text = fs::read_to_string(d.join("sel/inclusion.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 12);
    for line in text.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    let chains = fs::read_to_string(d.join("sel/chains.csv")).unwrap();
    assert!(chains.lines().next().unwrap().ends_with("beta_12,pi_star"));
}

#[test]
fn edge_list_networks_need_node_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("g1.csv"), "1,2\n2,3\n3,4\n4,5\n1,5\n").unwrap();
    fs::write(d.join("g2.csv"), "1,3\n2,4\n3,5\n").unwrap();
    assert_eq!(
        code(
            &[
                "embed",
                "--networks",
                "g1.csv",
                "g2.csv",
                "--format",
                "edge-list",
                "--dim",
                "2",
                "--out",
                "e"
            ],
            d
        ),
        1
    );
    ok(
        &[
            "embed",
            "--networks",
            "g1.csv",
            "g2.csv",
            "--format",
            "edge-list",
            "--nodes",
            "5",
            "--dim",
            "2",
            "--out",
            "e",
        ],
        d,
    );
    assert_eq!(read_embedding(d.join("e/g2.json")).unwrap().nodes(), 5);
}

#[test]
fn benchmark_counts_rows_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"{
        "sim": {"n_train": 12, "n_test": 6, "p": 10},
        "em": {"dim": 3, "max_iters": 50},
        "sampler": {"iterations": 40, "burn_in": 10},
        "benchmark": {"cells": [{"d0": 2, "sparsity": 0.25}, {"d0": 3, "sparsity": 0.5}], "replicates": 2,
                      "pca_components": 3}
    }"#;
    fs::write(d.join("bench.json"), cfg).unwrap();
    ok(
        &[
            "benchmark",
            "--config",
            "bench.json",
            "--seed",
            "11",
            "--out",
            "b1",
        ],
        d,
    );
    ok(&["benchmark", "--config", "b1/run.json", "--out", "b2"], d);
    let results = fs::read_to_string(d.join("b1/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 4);
    let agg = fs::read_to_string(d.join("b1/aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 2 * 4);
    assert_eq!(agg, fs::read_to_string(d.join("b2/aggregate.csv")).unwrap());
    assert_eq!(
        results,
        fs::read_to_string(d.join("b2/results.csv")).unwrap()
    );

    ok(
        &[
            "benchmark",
            "--config",
            "bench.json",
            "--methods",
            "ridge",
            "--replicates",
            "1",
            "--out",
            "b3",
        ],
        d,
    );
    assert_eq!(
        fs::read_to_string(d.join("b3/results.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 2
    );
}
