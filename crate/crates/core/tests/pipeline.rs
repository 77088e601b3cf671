//! End-to-end checks: CLI subcommands chained over real files, experiment
//! determinism, and the large-K consistency run.

use std::path::Path;
use std::process::Command;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fbtl::estimators::fbtl_ls;
use fbtl::experiment::{run_experiment, ExperimentConfig, ExperimentKind};
use fbtl::features::{CoeffMode, FeatureSet};
use fbtl::graph::{Family, RelationGraph};
use fbtl::metrics::{l2_error, Alignment};
use fbtl::model::{sample_pairs, ComparisonSample, FbtlModel, ModelForm};
use fbtl::Estimator;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fbtl"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn fbtl");
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout),
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn cli_generate_simulate_estimate_chain() {
    let dir = tempfile::tempdir().unwrap();
    let graph_path = dir.path().join("graph.txt");
    run_ok(cli().args([
        "gen-graph",
        "--family",
        "r-cliques",
        "--n",
        "30",
        "--param",
        "6",
        "--seed",
        "3",
        "--out",
        graph_path.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&graph_path).unwrap();
    let graph = RelationGraph::from_edge_list_str(&text).unwrap();
    assert_eq!(graph.alpha(), 6);

    let bundle_dir = dir.path().join("bundle");
    run_ok(cli().args([
        "simulate",
        "--graph",
        graph_path.to_str().unwrap(),
        "--p",
        "0.5",
        "--k",
        "2000",
        "--seed",
        "9",
        "--out",
        bundle_dir.to_str().unwrap(),
    ]));
    for file in ["features.csv", "scores.csv", "counts.csv"] {
        assert!(bundle_dir.join(file).exists(), "missing {file}");
    }

    let est_dir = dir.path().join("est");
    let stdout = run_ok(cli().args([
        "estimate",
        "--features",
        bundle_dir.join("features.csv").to_str().unwrap(),
        "--counts",
        bundle_dir.join("counts.csv").to_str().unwrap(),
        "--graph",
        graph_path.to_str().unwrap(),
        "--scores",
        bundle_dir.join("scores.csv").to_str().unwrap(),
        "--estimator",
        "fbtl-ls,ols,rc",
        "--out",
        est_dir.to_str().unwrap(),
    ]));
    assert!(stdout.contains("fbtl-ls:"));
    assert!(stdout.contains("rc:"));

    let diagnostics = std::fs::read_to_string(est_dir.join("diagnostics.csv")).unwrap();
    assert_eq!(diagnostics.lines().count(), 4); // header + 3 estimators
                                                // The feature-aware estimate should beat the noise floor comfortably at
                                                // p = 0.5, K = 2000.
    let fbtl_line = diagnostics
        .lines()
        .find(|l| l.starts_with("fbtl-ls,"))
        .unwrap();
    let l2_aligned: f64 = fbtl_line.split(',').nth(12).unwrap().parse().unwrap();
    assert!(l2_aligned < 0.2, "aligned error {l2_aligned}");

    let estimates = std::fs::read_to_string(est_dir.join("estimates.csv")).unwrap();
    assert_eq!(estimates.lines().count(), 1 + 3 * 30);
}

#[test]
fn cli_graph_output_is_deterministic() {
    let a = run_ok(cli().args([
        "gen-graph",
        "--family",
        "d-regular",
        "--n",
        "16",
        "--param",
        "3",
        "--seed",
        "5",
    ]));
    let b = run_ok(cli().args([
        "gen-graph",
        "--family",
        "d-regular",
        "--n",
        "16",
        "--param",
        "3",
        "--seed",
        "5",
    ]));
    assert_eq!(a, b);
    assert!(a.starts_with("n 16\n"));
}

#[test]
fn cli_bound_table_prints_rows() {
    let out = run_ok(cli().args([
        "bound",
        "--family",
        "r-cliques",
        "--param",
        "5",
        "--n-grid",
        "25",
        "--delta-grid",
        "0.2,0.1",
        "--p-steps",
        "3",
    ]));
    assert!(out.starts_with("family,n,param,delta,p_min,p,bound\n"));
    assert!(out.lines().count() > 4);
    assert!(out.contains("r-cliques,25,5,"));
}

#[test]
fn cli_sc_reports_a_budget() {
    let out = run_ok(cli().args([
        "sc",
        "--family",
        "r-cliques",
        "--n",
        "16",
        "--param",
        "4",
        "--epsilon",
        "0.5",
        "--k",
        "0",
        "--trials",
        "6",
        "--estimator",
        "fbtl-ls",
        "--seed",
        "4",
        "--m-grid",
        "4,8,16,32,64",
    ]));
    assert!(out.starts_with("estimator,n,alpha,epsilon,K,m_min\n"));
    let row = out.lines().nth(1).unwrap();
    assert!(row.starts_with("fbtl-ls,16,4,"));
    let m_min: usize = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!(m_min <= 32, "noiseless sc unexpectedly large: {m_min}");
}

#[test]
fn cli_experiment_runs_from_config_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "experiment": "type3_vs_alpha",
        "family": "r-cliques",
        "n": 24,
        "alpha_schedule": [2, 4],
        "estimators": ["fbtl-ls", "rc"],
        "k": 200,
        "trials": 2,
        "seed": 7
    });
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        run_ok(cli().args([
            "experiment",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]));
    }
    let runs_a = std::fs::read_to_string(out_a.join("runs.csv")).unwrap();
    let runs_b = std::fs::read_to_string(out_b.join("runs.csv")).unwrap();
    assert_eq!(runs_a, runs_b);
    // 2 points x 2 trials x 2 estimators.
    assert_eq!(runs_a.lines().count(), 1 + 8);
    let agg = std::fs::read_to_string(out_a.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 4);

    // A CLI override must change the output deterministically.
    let out_c = dir.path().join("c");
    run_ok(cli().args([
        "experiment",
        "--config",
        config_path.to_str().unwrap(),
        "--seed",
        "8",
        "--out",
        out_c.to_str().unwrap(),
    ]));
    let runs_c = std::fs::read_to_string(out_c.join("runs.csv")).unwrap();
    assert_ne!(runs_a, runs_c);
}

#[test]
fn cli_real_dataset_experiment_reports_pd_only() {
    let dir = tempfile::tempdir().unwrap();
    // Synthesize a bundle through the CLI, then point a real_dataset
    // experiment at it.
    let graph_path = dir.path().join("graph.txt");
    run_ok(cli().args([
        "gen-graph",
        "--family",
        "r-cliques",
        "--n",
        "20",
        "--param",
        "5",
        "--out",
        graph_path.to_str().unwrap(),
    ]));
    let bundle = dir.path().join("bundle");
    run_ok(cli().args([
        "simulate",
        "--graph",
        graph_path.to_str().unwrap(),
        "--p",
        "1.0",
        "--k",
        "500",
        "--seed",
        "2",
        "--out",
        bundle.to_str().unwrap(),
    ]));
    let config = serde_json::json!({
        "experiment": "real_dataset",
        "features": bundle.join("features.csv"),
        "counts": bundle.join("counts.csv"),
        "p_schedule": [0.6],
        "k_schedule": [200],
        "estimators": ["fbtl-ls", "ols"],
        "trials": 2,
        "seed": 3
    });
    let config_path = dir.path().join("real.json");
    std::fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    run_ok(cli().args([
        "experiment",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let runs = std::fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    let mut data_rows = 0;
    for line in runs.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[6], "NaN", "real data has no l2 ground truth");
        let pd: f64 = cells[7].parse().unwrap();
        assert!((0.0..=0.5).contains(&pd));
        data_rows += 1;
    }
    assert_eq!(data_rows, 4);
}

#[test]
fn large_k_estimates_converge() {
    // Monte-Carlo consistency: at K = 10^6 the empirical log-odds pin the
    // scores to well under one percent error.
    let n = 30;
    let g = RelationGraph::family(Family::RDisconnectedCliques, n, 6, 0).unwrap();
    let f = FeatureSet::synthesize(&g, CoeffMode::Gaussian, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = DVector::from_fn(f.dim(), |_, _| rng.random_range(-1.0..1.0));
    let model = FbtlModel::from_features(&w, &f, ModelForm::Exponential, true).unwrap();
    let pairs = sample_pairs(n, 0.5, 3).unwrap();
    let sample = ComparisonSample::draw(pairs, &model, 1_000_000, 4).unwrap();
    let report = fbtl_ls(&f, &sample).unwrap();
    let err = l2_error(&report.theta_hat, model.theta(), Alignment::Sign).unwrap();
    assert!(err < 0.01, "error {err}");
}

#[test]
fn experiment_type1_traces_the_node_sweep() {
    let cfg = ExperimentConfig {
        experiment: ExperimentKind::Type1VsN,
        family: Some(Family::RDisconnectedCliques),
        param: Some(5),
        n: None,
        n_schedule: vec![15, 30],
        c_schedule: vec![],
        alpha_schedule: vec![],
        p_schedule: vec![],
        k_schedule: vec![],
        p_coeff: Some(10.0),
        estimators: vec![Estimator::FbtlLs],
        coeff_mode: None,
        form: None,
        k: Some(500),
        trials: Some(3),
        seed: Some(1),
        epsilon: None,
        m_grid: vec![],
        features: None,
        counts: None,
        out_dir: None,
    };
    let out = run_experiment(&cfg).unwrap();
    let lines: Vec<&str> = out.runs_csv.lines().collect();
    assert_eq!(lines.len(), 1 + 6);
    assert!(lines[1].starts_with("fbtl-ls,15,5,"));
    assert!(lines[4].starts_with("fbtl-ls,30,5,"));
}

#[test]
fn scores_round_trip_through_the_simulate_files() {
    // The exported score file reloads to the exact generating values.
    let dir = tempfile::tempdir().unwrap();
    let graph_path = dir.path().join("g.txt");
    run_ok(cli().args([
        "gen-graph",
        "--family",
        "star",
        "--n",
        "12",
        "--out",
        graph_path.to_str().unwrap(),
    ]));
    let bundle = dir.path().join("b");
    run_ok(cli().args([
        "simulate",
        "--graph",
        graph_path.to_str().unwrap(),
        "--p",
        "0.9",
        "--k",
        "50",
        "--seed",
        "6",
        "--out",
        bundle.to_str().unwrap(),
    ]));
    let scores = std::fs::read_to_string(bundle.join("scores.csv")).unwrap();
    let theta: Vec<f64> = scores
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(theta.len(), 12);
    let norm_sq: f64 = theta.iter().map(|v| v * v).sum::<f64>();
    assert!((norm_sq - 1.0).abs() < 1e-12, "scores are stored exactly");
    assert!(graph_file_is_one_based(&graph_path));
}

fn graph_file_is_one_based(path: &Path) -> bool {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(2).all(|l| {
        l.split_whitespace()
            .all(|t| t.parse::<usize>().map(|v| v >= 1).unwrap_or(false))
    })
}
