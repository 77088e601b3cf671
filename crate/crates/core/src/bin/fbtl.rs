use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use fbtl::dataset::{counts_csv_string, features_csv_string, load_dataset};
use fbtl::estimators::estimate;
use fbtl::experiment::{bound_table, run_experiment, ExperimentConfig, ExperimentKind};
use fbtl::features::{CoeffMode, FeatureSet};
use fbtl::fmt_sig;
use fbtl::graph::{Family, RelationGraph};
use fbtl::metrics::{default_alignment, l2_error, pd_error, preference_matrix, Alignment};
use fbtl::model::{sample_pairs, ComparisonSample, FbtlModel, ModelForm};
use fbtl::Estimator;

/// Ranking from pairwise comparisons with item features: data generation,
/// score estimation, recovery bounds, and benchmark experiments.
#[derive(Parser)]
#[command(name = "fbtl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a relation graph and print or write its edge-list file.
    GenGraph(GenGraphArgs),
    /// Synthesize features, scores, and comparisons for a graph file.
    Simulate(SimulateArgs),
    /// Estimate scores from a feature/counts bundle.
    Estimate(EstimateArgs),
    /// Tabulate closed-form sampling thresholds and error-probability bounds.
    Bound(BoundArgs),
    /// Run a configured benchmark experiment.
    Experiment(ExperimentArgs),
    /// Sample-complexity sweep for a single scenario.
    Sc(ScArgs),
}

#[derive(Args)]
struct GenGraphArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: usize,
    /// Family parameter (r for r-cliques, d for d-regular, k for k-tree).
    #[arg(long, default_value_t = 0)]
    param: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "gaussian")]
    coeff_mode: String,
    #[arg(long, default_value = "exponential")]
    form: String,
    /// Per-pair inclusion probability.
    #[arg(long)]
    p: f64,
    /// Comparisons per sampled pair.
    #[arg(long, default_value_t = 1000)]
    k: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for features.csv, scores.csv, counts.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    counts: PathBuf,
    /// Graph file fixing the independent set; greedy feature pivoting
    /// otherwise.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// True scores file (item,score) enabling l2 error reporting.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Comma-separated list: fbtl-ls,ols,rc.
    #[arg(long, value_delimiter = ',', default_value = "fbtl-ls")]
    estimator: Vec<String>,
    /// Output directory for estimates.csv and diagnostics.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 0)]
    param: usize,
    #[arg(long, value_delimiter = ',')]
    n_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    delta_grid: Vec<f64>,
    /// Number of p grid points starting at the closed-form threshold.
    #[arg(long, default_value_t = 6)]
    p_steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    estimator: Vec<String>,
}

#[derive(Args)]
struct ScArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    param: usize,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Comparisons per pair; 0 uses exact probabilities.
    #[arg(long, default_value_t = 1000)]
    k: u64,
    #[arg(long, default_value_t = 50)]
    trials: u32,
    #[arg(long, value_delimiter = ',', default_value = "fbtl-ls")]
    estimator: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    m_grid: Vec<usize>,
    #[arg(long, default_value = "gaussian")]
    coeff_mode: String,
    #[arg(long, default_value = "exponential")]
    form: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    if let Ok(threads) = std::env::var("FBTL_THREADS") {
        let threads: usize = threads
            .parse()
            .context("FBTL_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    match Cli::parse().command {
        Command::GenGraph(args) => gen_graph(args),
        Command::Simulate(args) => simulate(args),
        Command::Estimate(args) => run_estimate(args),
        Command::Bound(args) => bound(args),
        Command::Experiment(args) => experiment(args),
        Command::Sc(args) => sc(args),
    }
}

fn parse_estimators(names: &[String]) -> anyhow::Result<Vec<Estimator>> {
    names
        .iter()
        .map(|s| Estimator::from_str(s).map_err(Into::into))
        .collect()
}

fn gen_graph(args: GenGraphArgs) -> anyhow::Result<()> {
    let family = Family::from_str(&args.family)?;
    let graph = RelationGraph::family(family, args.n, args.param, args.seed)?;
    let text = graph.to_edge_list_string();
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text)?;
            eprintln!(
                "wrote {} (n={}, alpha={}, edges={})",
                path.display(),
                graph.n(),
                graph.alpha(),
                graph.edge_count()
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.graph)
        .with_context(|| format!("reading {}", args.graph.display()))?;
    let graph = RelationGraph::from_edge_list_str(&text)?;
    let mode = CoeffMode::from_str(&args.coeff_mode)?;
    let form = ModelForm::from_str(&args.form)?;
    let features = FeatureSet::synthesize(&graph, mode, args.seed)?;

    let mut rng =
        <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(args.seed.wrapping_add(1));
    let w = match form {
        ModelForm::Exponential => DVector::from_fn(features.dim(), |_, _| {
            rand::Rng::random_range(&mut rng, -1.0..1.0)
        }),
        ModelForm::Multiplicative => DVector::from_fn(features.dim(), |_, _| {
            rand::Rng::random_range(&mut rng, 0.5..1.5)
        }),
    };
    let model = FbtlModel::from_features(&w, &features, form, true)?;
    let pairs = sample_pairs(graph.n(), args.p, args.seed.wrapping_add(2))?;
    if pairs.is_empty() {
        bail!(
            "no pairs sampled at p = {}; increase p or change the seed",
            args.p
        );
    }
    let sample = ComparisonSample::draw(pairs, &model, args.k, args.seed.wrapping_add(3))?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(
        args.out.join("features.csv"),
        features_csv_string(features.u()),
    )?;
    let mut scores = String::from("item,score\n");
    for (i, v) in model.theta().iter().enumerate() {
        scores.push_str(&format!("{},{}\n", i + 1, v));
    }
    std::fs::write(args.out.join("scores.csv"), scores)?;
    std::fs::write(args.out.join("counts.csv"), counts_csv_string(&sample))?;
    eprintln!(
        "wrote bundle to {} (n={}, alpha={}, m={}, K={})",
        args.out.display(),
        graph.n(),
        graph.alpha(),
        sample.m(),
        args.k
    );
    Ok(())
}

fn read_scores(path: &PathBuf, n: usize) -> anyhow::Result<DVector<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut theta = DVector::zeros(n);
    let mut seen = vec![false; n];
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line.trim() != "item,score" {
                bail!("scores header must be `item,score`");
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let id: usize = cells
            .next()
            .and_then(|c| c.trim().parse().ok())
            .with_context(|| format!("bad item id on line {}", idx + 1))?;
        let value: f64 = cells
            .next()
            .and_then(|c| c.trim().parse().ok())
            .with_context(|| format!("bad score on line {}", idx + 1))?;
        if id == 0 || id > n {
            bail!("score item id {id} out of range");
        }
        seen[id - 1] = true;
        theta[id - 1] = value;
    }
    if seen.iter().any(|&s| !s) {
        bail!("scores file is missing items");
    }
    Ok(theta)
}

fn run_estimate(args: EstimateArgs) -> anyhow::Result<()> {
    let estimators = parse_estimators(&args.estimator)?;
    let basis = match &args.graph {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let graph = RelationGraph::from_edge_list_str(&text)?;
            Some(graph.independent_set().to_vec())
        }
        None => None,
    };
    let bundle = load_dataset(&args.features, &args.counts, basis)?;
    let n = bundle.features.n();
    let truth = match &args.scores {
        Some(path) => Some(read_scores(path, n)?),
        None => None,
    };

    let mut estimates = String::from("item,estimator,theta_hat\n");
    let mut diagnostics = String::from(
        "estimator,n,alpha,m,components,rank,lambda_first,lambda_last,residual_norm,iterations,wall_seconds,l2_raw,l2_aligned,pd_error\n",
    );
    for &which in &estimators {
        let report = estimate(which, &bundle.features, &bundle.sample)?;
        for (i, v) in report.theta_hat.iter().enumerate() {
            estimates.push_str(&format!("{},{},{}\n", i + 1, which, fmt_sig(*v)));
        }
        let (l2_raw, l2_aligned) = match &truth {
            Some(theta) => (
                l2_error(&report.theta_raw, theta, Alignment::Raw)?,
                l2_error(&report.theta_hat, theta, default_alignment(which))?,
            ),
            None => (f64::NAN, f64::NAN),
        };
        let p_hat = preference_matrix(&report.theta_hat, ModelForm::Exponential)?;
        let pd = pd_error(&p_hat, &bundle.p_star)?;
        let d = &report.diagnostics;
        diagnostics.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            which,
            n,
            bundle.features.alpha(),
            bundle.sample.m(),
            d.components,
            d.rank,
            fmt_sig(d.lambda_first),
            fmt_sig(d.lambda_last),
            fmt_sig(d.residual_norm),
            d.iterations,
            fmt_sig(d.wall_seconds),
            fmt_sig(l2_raw),
            fmt_sig(l2_aligned),
            fmt_sig(pd),
        ));
        println!(
            "{which}: pd={}{}",
            fmt_sig(pd),
            match &truth {
                Some(_) => format!(" l2={}", fmt_sig(l2_aligned)),
                None => String::new(),
            }
        );
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("estimates.csv"), estimates)?;
        std::fs::write(dir.join("diagnostics.csv"), diagnostics)?;
        eprintln!(
            "wrote estimates.csv and diagnostics.csv to {}",
            dir.display()
        );
    }
    Ok(())
}

fn bound(args: BoundArgs) -> anyhow::Result<()> {
    let family = Family::from_str(&args.family)?;
    if args.n_grid.is_empty() {
        bail!("--n-grid must name at least one node count");
    }
    let csv = bound_table(
        &[(family, args.param)],
        &args.n_grid,
        &args.delta_grid,
        args.p_steps,
    )?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn experiment(args: ExperimentArgs) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = args.out {
        cfg.out_dir = Some(out);
    }
    if let Some(k) = args.k {
        cfg.k = Some(k);
    }
    if let Some(trials) = args.trials {
        cfg.trials = Some(trials);
    }
    if !args.estimator.is_empty() {
        cfg.estimators = parse_estimators(&args.estimator)?;
    }
    let output = run_experiment(&cfg)?;
    for path in &output.written {
        eprintln!("wrote {}", path.display());
    }
    if output.written.is_empty() {
        if let Some(sc) = &output.sc_csv {
            print!("{sc}");
        } else {
            print!("{}", output.aggregate_csv);
        }
    }
    Ok(())
}

fn sc(args: ScArgs) -> anyhow::Result<()> {
    let cfg = ExperimentConfig {
        experiment: ExperimentKind::ScSweep,
        family: Some(Family::from_str(&args.family)?),
        param: Some(args.param),
        n: None,
        n_schedule: vec![args.n],
        c_schedule: vec![],
        alpha_schedule: vec![],
        p_schedule: vec![],
        k_schedule: vec![],
        p_coeff: None,
        estimators: parse_estimators(&args.estimator)?,
        coeff_mode: Some(CoeffMode::from_str(&args.coeff_mode)?),
        form: Some(ModelForm::from_str(&args.form)?),
        k: Some(args.k),
        trials: Some(args.trials),
        seed: Some(args.seed),
        epsilon: Some(args.epsilon),
        m_grid: args.m_grid.clone(),
        features: None,
        counts: None,
        out_dir: args.out.clone(),
    };
    let output = run_experiment(&cfg)?;
    if let Some(sc) = &output.sc_csv {
        print!("{sc}");
    }
    for path in &output.written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
