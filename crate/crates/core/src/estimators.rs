//! Score estimators: the feature-aware least-squares algorithm and the two
//! feature-blind baselines (ordinary least squares on the comparison graph,
//! Rank Centrality).

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::graph::Pair;
use crate::model::ComparisonSample;

/// Relative eigenvalue threshold below which a direction counts as null.
const NULL_TOL: f64 = 1e-12;

/// Relative singular-value cutoff for the least-squares pseudoinverse.
const PINV_TOL: f64 = 1e-10;

/// Rank Centrality power-iteration tolerance (l1) and iteration cap.
const RC_TOL: f64 = 1e-10;
const RC_MAX_ITER: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "fbtl-ls", alias = "fbtl_ls")]
    FbtlLs,
    #[serde(rename = "ols")]
    Ols,
    #[serde(rename = "rc", alias = "rank-centrality")]
    RankCentrality,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::FbtlLs => f.write_str("fbtl-ls"),
            Estimator::Ols => f.write_str("ols"),
            Estimator::RankCentrality => f.write_str("rc"),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fbtl-ls" | "fbtl_ls" | "fbtl" => Ok(Estimator::FbtlLs),
            "ols" => Ok(Estimator::Ols),
            "rc" | "rank-centrality" => Ok(Estimator::RankCentrality),
            other => Err(Error::invalid(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Node-edge incidence structure of the comparison graph. Column `e` for
/// pair `(i, j)` with `i < j` carries `+1` at the head `i` and `-1` at the
/// tail `j`, so `Q Q^T` is the unnormalized Laplacian.
#[derive(Clone, Debug)]
pub struct IncidenceMatrix {
    n: usize,
    pairs: Vec<Pair>,
}

impl IncidenceMatrix {
    pub fn new(pairs: &[Pair], n: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        for &(i, j) in pairs {
            if i >= j || j >= n {
                return Err(Error::invalid(format!(
                    "pair ({i}, {j}) is not a canonical pair over {n} items"
                )));
            }
        }
        Ok(Self {
            n,
            pairs: pairs.to_vec(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    /// Dense n x m incidence matrix.
    pub fn dense(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.n, self.m());
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            q[(i, e)] = 1.0;
            q[(j, e)] = -1.0;
        }
        q
    }

    /// Unnormalized Laplacian `Q Q^T = D - A`, assembled directly.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.pairs {
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
            l[(i, j)] -= 1.0;
            l[(j, i)] -= 1.0;
        }
        l
    }

    /// `Q y`: accumulates edge values onto nodes with incidence signs.
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            out[i] += y[e];
            out[j] -= y[e];
        }
        out
    }

    /// `(B^T Q)^T`, the m x alpha system matrix with row `e = B_i - B_j`.
    pub fn reduced_system(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let alpha = b.ncols();
        let mut system = DMatrix::zeros(self.m(), alpha);
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            for k in 0..alpha {
                system[(e, k)] = b[(i, k)] - b[(j, k)];
            }
        }
        system
    }
}

/// Solve diagnostics attached to every estimate.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    /// `||A x - y||` of the solved least-squares system, or the final
    /// l1 step size for Rank Centrality.
    pub residual_norm: f64,
    /// Smallest nonzero eigenvalue of the solve operator's PSD matrix
    /// (reduced Laplacian for fbtl-ls, Laplacian for OLS; 0 for RC).
    pub lambda_first: f64,
    /// Largest eigenvalue of the same matrix.
    pub lambda_last: f64,
    /// Number of nonzero eigenvalues.
    pub rank: usize,
    /// Connected components of the comparison graph.
    pub components: usize,
    /// Power-iteration count (Rank Centrality only).
    pub iterations: usize,
    pub wall_seconds: f64,
}

/// Estimated scores: `theta_hat` follows the unit-norm reporting convention,
/// `theta_raw` is the estimator's unnormalized solution.
#[derive(Clone, Debug)]
pub struct EstimateReport {
    pub estimator: Estimator,
    pub theta_hat: DVector<f64>,
    pub theta_raw: DVector<f64>,
    pub diagnostics: Diagnostics,
}

/// Runs the selected estimator.
pub fn estimate(
    which: Estimator,
    features: &FeatureSet,
    sample: &ComparisonSample,
) -> Result<EstimateReport> {
    match which {
        Estimator::FbtlLs => fbtl_ls(features, sample),
        Estimator::Ols => ols(sample, features.n()),
        Estimator::RankCentrality => rank_centrality(sample, features.n()),
    }
}

/// Feature-aware least squares: solves
/// `v = argmin || (B^T Q)^T x - y_hat ||` by minimum-norm pseudoinverse and
/// extends to all items as `theta = B v`, which ties scores across
/// comparison-graph components through the coefficient matrix.
pub fn fbtl_ls(features: &FeatureSet, sample: &ComparisonSample) -> Result<EstimateReport> {
    let start = Instant::now();
    let n = features.n();
    let inc = IncidenceMatrix::new(sample.pairs(), n)?;
    let b = features.b();
    let system = inc.reduced_system(b);
    if system.amax() == 0.0 {
        return Err(Error::NoInformation);
    }
    let y = DVector::from_column_slice(sample.y_hat());

    let svd = system.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let v_hat = svd
        .solve(&y, PINV_TOL * sigma_max)
        .map_err(|m| Error::invalid(m.to_string()))?;
    let residual_norm = (&system * &v_hat - &y).norm();
    let theta_raw = b * v_hat;

    let reduced_laplacian = system.transpose() * &system;
    let (lambda_first, lambda_last, rank) = psd_spectrum_summary(reduced_laplacian);
    let (components, _) = connected_components(n, sample.pairs());

    Ok(EstimateReport {
        estimator: Estimator::FbtlLs,
        theta_hat: unit_normalized(theta_raw.clone()),
        theta_raw,
        diagnostics: Diagnostics {
            residual_norm,
            lambda_first,
            lambda_last,
            rank,
            components,
            iterations: 0,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// Feature-blind least squares over the comparison graph: the minimum-norm
/// solution of `argmin || Q^T x - y_hat ||` through the Laplacian
/// pseudoinverse, centered per connected component.
pub fn ols(sample: &ComparisonSample, n: usize) -> Result<EstimateReport> {
    let start = Instant::now();
    let inc = IncidenceMatrix::new(sample.pairs(), n)?;
    let y = DVector::from_column_slice(sample.y_hat());
    let lap = inc.laplacian();
    let eigen = SymmetricEigen::new(lap);
    let lambda_max = eigen.eigenvalues.max();
    let threshold = NULL_TOL * lambda_max;

    let rhs = inc.apply(&y);
    let mut coords = eigen.eigenvectors.transpose() * rhs;
    for (t, c) in coords.iter_mut().enumerate() {
        let lambda = eigen.eigenvalues[t];
        *c = if lambda > threshold { *c / lambda } else { 0.0 };
    }
    let mut theta_raw = &eigen.eigenvectors * coords;

    let (components, labels) = connected_components(n, sample.pairs());
    center_per_component(&mut theta_raw, &labels, components);

    let residual_norm = {
        let mut r = 0.0f64;
        for (e, &(i, j)) in sample.pairs().iter().enumerate() {
            let d = theta_raw[i] - theta_raw[j] - y[e];
            r += d * d;
        }
        r.sqrt()
    };
    let (lambda_first, lambda_last, rank) = spectrum_summary(&eigen.eigenvalues);

    Ok(EstimateReport {
        estimator: Estimator::Ols,
        theta_hat: unit_normalized(theta_raw.clone()),
        theta_raw,
        diagnostics: Diagnostics {
            residual_norm,
            lambda_first,
            lambda_last,
            rank,
            components,
            iterations: 0,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// Rank Centrality: stationary distribution of the Markov chain that moves
/// from `i` to `j` with probability `p_hat(j beats i) / d_max`, reported as
/// log-scores for comparability with the exponential form.
pub fn rank_centrality(sample: &ComparisonSample, n: usize) -> Result<EstimateReport> {
    let start = Instant::now();
    let inc = IncidenceMatrix::new(sample.pairs(), n)?;
    let mut degree = vec![0usize; n];
    for &(i, j) in inc.pairs() {
        degree[i] += 1;
        degree[j] += 1;
    }
    let d_max = degree.iter().copied().max().unwrap_or(0).max(1) as f64;

    // Outgoing rate per edge endpoint; the remainder stays put.
    let mut rate_ij = Vec::with_capacity(inc.m());
    let mut rate_ji = Vec::with_capacity(inc.m());
    let mut out_rate = vec![0.0f64; n];
    for (e, &(i, j)) in inc.pairs().iter().enumerate() {
        let p = sample.p_hat()[e]; // P(i beats j)
        let fwd = (1.0 - p) / d_max;
        let bwd = p / d_max;
        rate_ij.push(fwd);
        rate_ji.push(bwd);
        out_rate[i] += fwd;
        out_rate[j] += bwd;
    }

    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0f64; n];
    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    while iterations < RC_MAX_ITER && delta > RC_TOL {
        for v in 0..n {
            next[v] = pi[v] * (1.0 - out_rate[v]);
        }
        for (e, &(i, j)) in inc.pairs().iter().enumerate() {
            next[j] += pi[i] * rate_ij[e];
            next[i] += pi[j] * rate_ji[e];
        }
        delta = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
        std::mem::swap(&mut pi, &mut next);
        iterations += 1;
    }

    let mut theta_raw = DVector::from_iterator(n, pi.iter().map(|&x| x.ln()));
    let log_scale = theta_raw.norm();
    let (components, labels) = connected_components(n, sample.pairs());
    center_per_component(&mut theta_raw, &labels, components);
    // Centered log-scores below the stationary solve's own accuracy are
    // noise; normalizing them would blow noise up to a unit vector.
    let theta_hat = if theta_raw.norm() <= 1e-9 * (1.0 + log_scale) {
        DVector::zeros(n)
    } else {
        unit_normalized(theta_raw.clone())
    };

    Ok(EstimateReport {
        estimator: Estimator::RankCentrality,
        theta_hat,
        theta_raw,
        diagnostics: Diagnostics {
            residual_norm: delta,
            lambda_first: 0.0,
            lambda_last: 0.0,
            rank: 0,
            components,
            iterations,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// The stationary distribution itself (sums to one), for callers that want
/// the multiplicative-scale weights.
pub fn rank_centrality_stationary(sample: &ComparisonSample, n: usize) -> Result<DVector<f64>> {
    let report = rank_centrality(sample, n)?;
    let mut pi = report.theta_raw.map(f64::exp);
    let total = pi.sum();
    pi /= total;
    Ok(pi)
}

/// Union-find connected components of the comparison graph; returns the
/// component count and a label per node.
pub fn connected_components(n: usize, pairs: &[Pair]) -> (usize, Vec<usize>) {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &(i, j) in pairs {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut labels = vec![0usize; n];
    let mut count = 0;
    let mut seen = vec![usize::MAX; n];
    for (v, label) in labels.iter_mut().enumerate() {
        let root = find(&mut parent, v);
        if seen[root] == usize::MAX {
            seen[root] = count;
            count += 1;
        }
        *label = seen[root];
    }
    (count, labels)
}

fn unit_normalized(v: DVector<f64>) -> DVector<f64> {
    let norm = v.norm();
    if norm > 0.0 {
        v / norm
    } else {
        v
    }
}

fn center_per_component(v: &mut DVector<f64>, labels: &[usize], components: usize) {
    let mut sums = vec![0.0f64; components];
    let mut counts = vec![0usize; components];
    for (i, &l) in labels.iter().enumerate() {
        sums[l] += v[i];
        counts[l] += 1;
    }
    for (i, &l) in labels.iter().enumerate() {
        v[i] -= sums[l] / counts[l] as f64;
    }
}

fn spectrum_summary(eigenvalues: &DVector<f64>) -> (f64, f64, usize) {
    let lambda_max = eigenvalues.max();
    let threshold = NULL_TOL * lambda_max;
    let mut lambda_first = f64::INFINITY;
    let mut rank = 0;
    for &l in eigenvalues.iter() {
        if l > threshold {
            lambda_first = lambda_first.min(l);
            rank += 1;
        }
    }
    if rank == 0 {
        (0.0, lambda_max.max(0.0), 0)
    } else {
        (lambda_first, lambda_max, rank)
    }
}

fn psd_spectrum_summary(matrix: DMatrix<f64>) -> (f64, f64, usize) {
    let eigen = SymmetricEigen::new(matrix);
    spectrum_summary(&eigen.eigenvalues)
}
