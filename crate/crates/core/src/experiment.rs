//! Reproducible experiment harness: schedule-driven benchmark runs over
//! synthetic graph families or loaded datasets, with deterministic seeding
//! and plot-ready CSV output.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, DatasetBundle};
use crate::error::{Error, Result};
use crate::estimators::{estimate, Estimator};
use crate::features::{CoeffMode, FeatureSet};
use crate::fmt_sig;
use crate::graph::{pair_count, EdgeCoverSets, Family, RelationGraph};
use crate::metrics::{
    default_alignment, default_m_grid, l2_error, pd_error, preference_matrix, sample_complexity,
};
use crate::model::{sample_pairs, sample_pairs_exact, ComparisonSample, FbtlModel, ModelForm};
use crate::recovery::{closed_form_threshold, error_probability_bound};

/// Experiment designs. The first three sweep node count, sampling rate, and
/// independence number on synthetic data; the last two run dataset
/// evaluation and sample-complexity sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "type1_vs_n")]
    Type1VsN,
    #[serde(rename = "type2_vs_p")]
    Type2VsP,
    #[serde(rename = "type3_vs_alpha")]
    Type3VsAlpha,
    #[serde(rename = "real_dataset")]
    RealDataset,
    #[serde(rename = "sc_sweep")]
    ScSweep,
}

/// Full experiment description; `(config, seed)` determines every output
/// byte. Flat key-value JSON on disk, CLI flags override file values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub family: Option<Family>,
    #[serde(default)]
    pub param: Option<usize>,
    /// Fixed node count (type2, type3, alpha-driven sc sweeps).
    #[serde(default)]
    pub n: Option<usize>,
    /// Node schedule (type1, n-driven sc sweeps).
    #[serde(default)]
    pub n_schedule: Vec<usize>,
    /// Sampling-rate multipliers C with p = C alpha log(alpha) / C(n,2).
    #[serde(default)]
    pub c_schedule: Vec<f64>,
    /// Family parameters (r or d) driving the independence number (type3).
    #[serde(default)]
    pub alpha_schedule: Vec<usize>,
    /// Explicit sampling probabilities (real_dataset).
    #[serde(default)]
    pub p_schedule: Vec<f64>,
    /// Comparisons-per-pair schedule (real_dataset); defaults to `[k]`.
    #[serde(default)]
    pub k_schedule: Vec<u64>,
    /// Multiplier for the default p rule in type1/type3 (default 10).
    #[serde(default)]
    pub p_coeff: Option<f64>,
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub coeff_mode: Option<CoeffMode>,
    #[serde(default)]
    pub form: Option<ModelForm>,
    #[serde(default)]
    pub k: Option<u64>,
    #[serde(default)]
    pub trials: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Target error for sc sweeps.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Explicit sc grid; defaults to geometric alpha..C(n,2) with ratio 1.5.
    #[serde(default)]
    pub m_grid: Vec<usize>,
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default)]
    pub counts: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))
    }

    pub fn k(&self) -> u64 {
        self.k.unwrap_or(1000)
    }

    pub fn trials(&self) -> u32 {
        self.trials.unwrap_or(50)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn p_coeff(&self) -> f64 {
        self.p_coeff.unwrap_or(10.0)
    }

    pub fn coeff_mode(&self) -> CoeffMode {
        self.coeff_mode.unwrap_or(CoeffMode::Gaussian)
    }

    pub fn form(&self) -> ModelForm {
        self.form.unwrap_or(ModelForm::Exponential)
    }

    fn family(&self) -> Result<Family> {
        self.family
            .ok_or_else(|| Error::invalid("config needs a graph family"))
    }

    fn fixed_n(&self) -> Result<usize> {
        self.n
            .ok_or_else(|| Error::invalid("config needs a fixed node count n"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::invalid("configure at least one estimator"));
        }
        if self.trials() == 0 {
            return Err(Error::invalid("trials must be positive"));
        }
        match self.experiment {
            ExperimentKind::Type1VsN => {
                self.family()?;
                if self.n_schedule.is_empty() {
                    return Err(Error::invalid("type1 needs a nonempty n_schedule"));
                }
            }
            ExperimentKind::Type2VsP => {
                self.family()?;
                self.fixed_n()?;
                if self.c_schedule.is_empty() {
                    return Err(Error::invalid("type2 needs a nonempty c_schedule"));
                }
            }
            ExperimentKind::Type3VsAlpha => {
                self.family()?;
                self.fixed_n()?;
                if self.alpha_schedule.is_empty() {
                    return Err(Error::invalid("type3 needs a nonempty alpha_schedule"));
                }
            }
            ExperimentKind::RealDataset => {
                if self.features.is_none() || self.counts.is_none() {
                    return Err(Error::invalid(
                        "real_dataset needs `features` and `counts` paths",
                    ));
                }
                if self.p_schedule.is_empty() {
                    return Err(Error::invalid("real_dataset needs a nonempty p_schedule"));
                }
            }
            ExperimentKind::ScSweep => {
                self.family()?;
                if self.n_schedule.is_empty()
                    && (self.alpha_schedule.is_empty() || self.n.is_none())
                {
                    return Err(Error::invalid(
                        "sc_sweep needs an n_schedule, or an alpha_schedule with fixed n",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One estimator run on one trial.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub estimator: Estimator,
    pub n: usize,
    pub alpha: usize,
    pub p: f64,
    pub k: u64,
    pub m: usize,
    pub l2_error: f64,
    pub pd_error: f64,
}

/// One sc-sweep result.
#[derive(Clone, Debug)]
pub struct ScRecord {
    pub estimator: Estimator,
    pub n: usize,
    pub alpha: usize,
    pub epsilon: f64,
    pub k: u64,
    pub m_min: Option<usize>,
}

/// Rendered experiment output; files are written when the config names an
/// output directory.
#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub runs_csv: String,
    pub aggregate_csv: String,
    pub sc_csv: Option<String>,
    pub written: Vec<PathBuf>,
}

/// Splits a seed stream deterministically (splitmix-style).
pub fn subseed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn p_from_alpha(coeff: f64, alpha: usize, n: usize) -> f64 {
    let total = pair_count(n) as f64;
    (coeff * alpha as f64 * (alpha as f64).ln() / total).clamp(0.0, 1.0)
}

/// A synthetic instance: graph, features, model. Scores are unit-norm.
fn synth_instance(
    family: Family,
    n: usize,
    param: usize,
    mode: CoeffMode,
    form: ModelForm,
    seed: u64,
) -> Result<(RelationGraph, FeatureSet, FbtlModel)> {
    let graph = RelationGraph::family(family, n, param, subseed(seed, 1))?;
    let features = FeatureSet::synthesize(&graph, mode, subseed(seed, 2))?;
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, 3));
    let w = match form {
        ModelForm::Exponential => {
            DVector::from_fn(features.dim(), |_, _| rng.random_range(-1.0..1.0))
        }
        // Positive weights keep every score positive under simplex rows.
        ModelForm::Multiplicative => {
            DVector::from_fn(features.dim(), |_, _| rng.random_range(0.5..1.5))
        }
    };
    let model = FbtlModel::from_features(&w, &features, form, true)?;
    Ok((graph, features, model))
}

fn failed_outcomes(
    estimators: &[Estimator],
    n: usize,
    alpha: usize,
    p: f64,
    k: u64,
    m: usize,
) -> Vec<RunRecord> {
    // An unusable sample counts as the worst case: unbounded score error,
    // full pairwise disagreement.
    let max_pd = pair_count(n) as f64 / (n * n) as f64;
    estimators
        .iter()
        .map(|&estimator| RunRecord {
            estimator,
            n,
            alpha,
            p,
            k,
            m,
            l2_error: f64::INFINITY,
            pd_error: max_pd,
        })
        .collect()
}

fn synthetic_trial(
    cfg: &ExperimentConfig,
    family: Family,
    n: usize,
    param: usize,
    p: f64,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    let k = cfg.k();
    let (graph, features, model) =
        synth_instance(family, n, param, cfg.coeff_mode(), cfg.form(), seed)?;
    let alpha = graph.alpha();
    let pairs = sample_pairs(n, p, subseed(seed, 4))?;
    let m = pairs.len();
    if m == 0 {
        return Ok(failed_outcomes(&cfg.estimators, n, alpha, p, k, 0));
    }
    let sample = ComparisonSample::draw(pairs, &model, k, subseed(seed, 5))?;
    let p_star = model.preference_matrix();
    let mut out = Vec::with_capacity(cfg.estimators.len());
    for &which in &cfg.estimators {
        let record = match estimate(which, &features, &sample) {
            Ok(report) => {
                let l2 = l2_error(&report.theta_hat, model.theta(), default_alignment(which))?;
                let p_hat = preference_matrix(&report.theta_hat, ModelForm::Exponential)?;
                let pd = pd_error(&p_hat, &p_star)?;
                RunRecord {
                    estimator: which,
                    n,
                    alpha,
                    p,
                    k,
                    m,
                    l2_error: l2,
                    pd_error: pd,
                }
            }
            Err(_) => failed_outcomes(&[which], n, alpha, p, k, m).pop().unwrap(),
        };
        out.push(record);
    }
    Ok(out)
}

fn real_trial(
    cfg: &ExperimentConfig,
    bundle: &DatasetBundle,
    p: f64,
    k: u64,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    let n = bundle.features.n();
    let alpha = bundle.features.alpha();
    let pairs = sample_pairs(n, p, subseed(seed, 4))?;
    let m = pairs.len();
    if m == 0 {
        return Ok(failed_outcomes(&cfg.estimators, n, alpha, p, k, 0));
    }
    let sample = ComparisonSample::draw_from_matrix(pairs, &bundle.p_star, k, subseed(seed, 5))?;
    let mut out = Vec::with_capacity(cfg.estimators.len());
    for &which in &cfg.estimators {
        let record = match estimate(which, &bundle.features, &sample) {
            Ok(report) => {
                let p_hat = preference_matrix(&report.theta_hat, ModelForm::Exponential)?;
                let pd = pd_error(&p_hat, &bundle.p_star)?;
                RunRecord {
                    estimator: which,
                    n,
                    alpha,
                    p,
                    k,
                    m,
                    // No ground-truth scores exist for real preferences.
                    l2_error: f64::NAN,
                    pd_error: pd,
                }
            }
            Err(_) => failed_outcomes(&[which], n, alpha, p, k, m).pop().unwrap(),
        };
        out.push(record);
    }
    Ok(out)
}

/// Error of a single sc trial: draws an instance, exactly `m` pairs, `k`
/// comparisons each (`k = 0` means exact probabilities), and returns the
/// aligned normalized error; failures count as infinite error.
#[allow(clippy::too_many_arguments)]
pub fn sc_trial_error(
    family: Family,
    n: usize,
    param: usize,
    mode: CoeffMode,
    form: ModelForm,
    which: Estimator,
    k: u64,
    m: usize,
    seed: u64,
) -> f64 {
    let run = || -> Result<f64> {
        let (_, features, model) = synth_instance(family, n, param, mode, form, seed)?;
        let pairs = sample_pairs_exact(n, m, subseed(seed, 4))?;
        let sample = if k == 0 {
            ComparisonSample::exact(pairs, &model)?
        } else {
            ComparisonSample::draw(pairs, &model, k, subseed(seed, 5))?
        };
        let report = estimate(which, &features, &sample)?;
        l2_error(&report.theta_hat, model.theta(), default_alignment(which))
    };
    run().unwrap_or(f64::INFINITY)
}

/// Smallest pair budget reaching mean error below epsilon for one scenario.
#[allow(clippy::too_many_arguments)]
pub fn sc_point(
    family: Family,
    n: usize,
    param: usize,
    mode: CoeffMode,
    form: ModelForm,
    which: Estimator,
    k: u64,
    epsilon: f64,
    trials: u32,
    m_grid: &[usize],
    base_seed: u64,
) -> Result<Option<usize>> {
    sample_complexity(
        |m, seed| sc_trial_error(family, n, param, mode, form, which, k, m, seed),
        epsilon,
        trials,
        m_grid,
        base_seed,
    )
}

/// Runs the configured experiment; one CSV row per (point, trial, estimator)
/// plus an aggregate per (point, estimator). Identical `(config, seed)`
/// produce identical bytes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut output = match cfg.experiment {
        ExperimentKind::ScSweep => run_sc_sweep(cfg)?,
        ExperimentKind::RealDataset => {
            let bundle = load_dataset(
                cfg.features.as_deref().expect("validated"),
                cfg.counts.as_deref().expect("validated"),
                None,
            )?;
            let k_schedule = if cfg.k_schedule.is_empty() {
                vec![cfg.k()]
            } else {
                cfg.k_schedule.clone()
            };
            let mut points = Vec::new();
            for &p in &cfg.p_schedule {
                for &k in &k_schedule {
                    points.push((p, k));
                }
            }
            let records = run_points(cfg, points.len(), |point_idx, trial_seed| {
                let (p, k) = points[point_idx];
                real_trial(cfg, &bundle, p, k, trial_seed)
            })?;
            render_records(records)
        }
        ExperimentKind::Type1VsN => {
            let family = cfg.family()?;
            let param = cfg.param.unwrap_or(0);
            let n_schedule = cfg.n_schedule.clone();
            let records = run_points(cfg, n_schedule.len(), |point_idx, trial_seed| {
                let n = n_schedule[point_idx];
                // The sampling rate follows the instance's own alpha.
                let graph = RelationGraph::family(family, n, param, subseed(trial_seed, 1))?;
                let p = p_from_alpha(cfg.p_coeff(), graph.alpha(), n);
                synthetic_trial(cfg, family, n, param, p, trial_seed)
            })?;
            render_records(records)
        }
        ExperimentKind::Type2VsP => {
            let family = cfg.family()?;
            let param = cfg.param.unwrap_or(0);
            let n = cfg.fixed_n()?;
            let c_schedule = cfg.c_schedule.clone();
            let records = run_points(cfg, c_schedule.len(), |point_idx, trial_seed| {
                let graph = RelationGraph::family(family, n, param, subseed(trial_seed, 1))?;
                let p = p_from_alpha(c_schedule[point_idx], graph.alpha(), n);
                synthetic_trial(cfg, family, n, param, p, trial_seed)
            })?;
            render_records(records)
        }
        ExperimentKind::Type3VsAlpha => {
            let family = cfg.family()?;
            let n = cfg.fixed_n()?;
            let alpha_schedule = cfg.alpha_schedule.clone();
            let records = run_points(cfg, alpha_schedule.len(), |point_idx, trial_seed| {
                let param = alpha_schedule[point_idx];
                let graph = RelationGraph::family(family, n, param, subseed(trial_seed, 1))?;
                let p = p_from_alpha(cfg.p_coeff(), graph.alpha(), n);
                synthetic_trial(cfg, family, n, param, p, trial_seed)
            })?;
            render_records(records)
        }
    };

    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        if !output.runs_csv.is_empty() {
            let path = dir.join("runs.csv");
            std::fs::write(&path, &output.runs_csv)?;
            output.written.push(path);
            let path = dir.join("aggregate.csv");
            std::fs::write(&path, &output.aggregate_csv)?;
            output.written.push(path);
        }
        if let Some(sc) = &output.sc_csv {
            let path = dir.join("sc.csv");
            std::fs::write(&path, sc)?;
            output.written.push(path);
        }
    }
    Ok(output)
}

/// Runs `trials` per point concurrently with derived seeds, collecting
/// outcomes in (point, trial, estimator) order regardless of completion
/// order.
fn run_points<F>(cfg: &ExperimentConfig, points: usize, trial: F) -> Result<Vec<RunRecord>>
where
    F: Fn(usize, u64) -> Result<Vec<RunRecord>> + Sync,
{
    let trials = cfg.trials();
    let mut all = Vec::new();
    for point_idx in 0..points {
        let point_seed = subseed(cfg.seed(), point_idx as u64 + 1);
        let per_trial: Vec<Result<Vec<RunRecord>>> = (0..trials)
            .into_par_iter()
            .map(|t| trial(point_idx, point_seed ^ t as u64))
            .collect();
        for result in per_trial {
            all.extend(result?);
        }
    }
    Ok(all)
}

fn run_sc_sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let family = cfg.family()?;
    let epsilon = cfg.epsilon.unwrap_or(0.5);
    let k = cfg.k();
    // Sweep nodes at fixed param, or params at fixed n.
    let points: Vec<(usize, usize)> = if !cfg.n_schedule.is_empty() {
        let param = cfg.param.unwrap_or(0);
        cfg.n_schedule.iter().map(|&n| (n, param)).collect()
    } else {
        let n = cfg.fixed_n()?;
        cfg.alpha_schedule.iter().map(|&a| (n, a)).collect()
    };
    let mut rows = Vec::new();
    for (point_idx, &(n, param)) in points.iter().enumerate() {
        let graph =
            RelationGraph::family(family, n, param, subseed(cfg.seed(), 90 + point_idx as u64))?;
        let alpha = graph.alpha();
        let grid = if cfg.m_grid.is_empty() {
            default_m_grid(alpha, n)
        } else {
            cfg.m_grid.clone()
        };
        let point_seed = subseed(cfg.seed(), point_idx as u64 + 1);
        for &which in &cfg.estimators {
            let m_min = sc_point(
                family,
                n,
                param,
                cfg.coeff_mode(),
                cfg.form(),
                which,
                k,
                epsilon,
                cfg.trials(),
                &grid,
                point_seed,
            )?;
            rows.push(ScRecord {
                estimator: which,
                n,
                alpha,
                epsilon,
                k,
                m_min,
            });
        }
    }
    let mut csv = String::from("estimator,n,alpha,epsilon,K,m_min\n");
    for r in &rows {
        let m = match r.m_min {
            Some(m) => m.to_string(),
            None => "not_reached".to_string(),
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.estimator,
            r.n,
            r.alpha,
            fmt_sig(r.epsilon),
            r.k,
            m
        ));
    }
    Ok(ExperimentOutput {
        runs_csv: String::new(),
        aggregate_csv: String::new(),
        sc_csv: Some(csv),
        written: Vec::new(),
    })
}

fn render_records(records: Vec<RunRecord>) -> ExperimentOutput {
    let mut runs = String::from("estimator,n,alpha,p,K,m,l2_error,pd_error\n");
    for r in &records {
        runs.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.estimator,
            r.n,
            r.alpha,
            fmt_sig(r.p),
            r.k,
            r.m,
            fmt_sig(r.l2_error),
            fmt_sig(r.pd_error),
        ));
    }

    // Aggregate over trials per (point, estimator); points are contiguous
    // blocks in record order, keyed by everything but m and the metrics.
    #[derive(PartialEq)]
    struct Key {
        estimator: Estimator,
        n: usize,
        alpha: usize,
        p: f64,
        k: u64,
    }
    let mut groups: Vec<(Key, Vec<&RunRecord>)> = Vec::new();
    for r in &records {
        let key = Key {
            estimator: r.estimator,
            n: r.n,
            alpha: r.alpha,
            p: r.p,
            k: r.k,
        };
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, list)) => list.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mut agg = String::from(
        "estimator,n,alpha,p,K,trials,mean_m,mean_l2_error,se_l2_error,mean_pd_error,se_pd_error\n",
    );
    for (key, list) in &groups {
        let t = list.len() as f64;
        let mean_m = list.iter().map(|r| r.m as f64).sum::<f64>() / t;
        let (mean_l2, se_l2) = mean_se(list.iter().map(|r| r.l2_error));
        let (mean_pd, se_pd) = mean_se(list.iter().map(|r| r.pd_error));
        agg.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            key.estimator,
            key.n,
            key.alpha,
            fmt_sig(key.p),
            key.k,
            list.len(),
            fmt_sig(mean_m),
            fmt_sig(mean_l2),
            fmt_sig(se_l2),
            fmt_sig(mean_pd),
            fmt_sig(se_pd),
        ));
    }
    ExperimentOutput {
        runs_csv: runs,
        aggregate_csv: agg,
        sc_csv: None,
        written: Vec::new(),
    }
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Tabulates the closed-form sampling threshold next to the error-probability
/// bound on an ascending p grid per (family, n, delta).
pub fn bound_table(
    entries: &[(Family, usize)],
    n_grid: &[usize],
    delta_grid: &[f64],
    p_steps: usize,
) -> Result<String> {
    let mut csv = String::from("family,n,param,delta,p_min,p,bound\n");
    for &(family, param) in entries {
        for &n in n_grid {
            for &delta in delta_grid {
                let p_min = closed_form_threshold(family, n, param, delta)?;
                let graph = RelationGraph::family(family, n, param, 0)?;
                let cover = EdgeCoverSets::from_graph(&graph);
                let mut q_max = graph.alpha().min(3);
                let mut ps: Vec<f64> = (0..p_steps)
                    .map(|s| (p_min * (1.0 + 0.5 * s as f64)).min(1.0))
                    .collect();
                ps.dedup();
                for p in ps {
                    let bound = loop {
                        match error_probability_bound(&cover, p, q_max) {
                            Ok(b) => break b,
                            Err(Error::EnumerationBudget { .. }) if q_max > 1 => q_max -= 1,
                            Err(e) => return Err(e),
                        }
                    };
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        family,
                        n,
                        param,
                        fmt_sig(delta),
                        fmt_sig(p_min),
                        fmt_sig(p),
                        fmt_sig(bound),
                    ));
                }
            }
        }
    }
    Ok(csv)
}
