//! Item feature vectors and the coefficient matrix expressing every item in
//! the independent-set basis.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::RelationGraph;

/// Default tolerance for rank and span checks.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Coefficient drawing mode for synthetic features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoeffMode {
    /// Nonnegative coefficients summing to one per item (uniform on the
    /// simplex over the item's support).
    #[serde(rename = "uniform-simplex", alias = "uniform_simplex")]
    UniformSimplex,
    /// I.i.d. standard normal coefficients on the support.
    #[serde(rename = "gaussian")]
    Gaussian,
}

impl fmt::Display for CoeffMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoeffMode::UniformSimplex => f.write_str("uniform-simplex"),
            CoeffMode::Gaussian => f.write_str("gaussian"),
        }
    }
}

impl FromStr for CoeffMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-simplex" | "uniform_simplex" | "simplex" => Ok(CoeffMode::UniformSimplex),
            "gaussian" => Ok(CoeffMode::Gaussian),
            other => Err(Error::invalid(format!(
                "unknown coefficient mode `{other}`"
            ))),
        }
    }
}

/// Feature matrix `U` (one row per item) together with the basis item list
/// and the coefficient matrix `B` reconstructing every row from the basis
/// rows.
#[derive(Clone, Debug)]
pub struct FeatureSet {
    u: DMatrix<f64>,
    basis: Vec<usize>,
    b: DMatrix<f64>,
}

impl FeatureSet {
    /// Synthesizes features for a relation graph: basis items carry canonical
    /// basis vectors of dimension alpha; every other item's coefficient row
    /// is supported on its closed independent neighborhood.
    pub fn synthesize(g: &RelationGraph, mode: CoeffMode, seed: u64) -> Result<Self> {
        let n = g.n();
        let alpha = g.alpha();
        let mut position = vec![usize::MAX; n];
        for (pos, &item) in g.independent_set().iter().enumerate() {
            position[item] = pos;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = DMatrix::<f64>::zeros(n, alpha);
        for item in 0..n {
            if position[item] != usize::MAX {
                b[(item, position[item])] = 1.0;
                continue;
            }
            let support: Vec<usize> = g
                .closed_independent_neighborhood(item)
                .into_iter()
                .map(|v| position[v])
                .collect();
            if support.is_empty() {
                return Err(Error::invalid(format!(
                    "item {item} has no independent-set neighbor; the independent set is not maximal"
                )));
            }
            match mode {
                CoeffMode::UniformSimplex => {
                    // Normalized exponentials are uniform on the simplex.
                    let draws: Vec<f64> = support.iter().map(|_| Exp1.sample(&mut rng)).collect();
                    let total: f64 = draws.iter().sum();
                    for (&pos, &x) in support.iter().zip(&draws) {
                        b[(item, pos)] = x / total;
                    }
                }
                CoeffMode::Gaussian => {
                    for &pos in &support {
                        b[(item, pos)] = StandardNormal.sample(&mut rng);
                    }
                }
            }
        }
        // Basis vectors are canonical, so U coincides with B.
        Ok(Self {
            u: b.clone(),
            basis: g.independent_set().to_vec(),
            b,
        })
    }

    /// Builds a feature set from an explicit feature matrix by solving for
    /// the coefficients against the given basis items.
    pub fn from_features(u: DMatrix<f64>, basis: Vec<usize>, tol: f64) -> Result<Self> {
        let b = compute_coefficients(&u, &basis, tol)?;
        Ok(Self { u, basis, b })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    pub fn alpha(&self) -> usize {
        self.basis.len()
    }

    /// Basis item indices, in coefficient-column order.
    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Max-norm residual of the reconstruction `U = B * U_basis`.
    pub fn reconstruction_residual(&self) -> f64 {
        let basis_rows = self.u.select_rows(self.basis.iter());
        let rebuilt = &self.b * basis_rows;
        (&rebuilt - &self.u).abs().max()
    }
}

/// Solves for the coefficient matrix expressing every item's features in the
/// basis rows of `u`, by least squares per item. Basis rows come out as
/// exact unit rows.
pub fn compute_coefficients(u: &DMatrix<f64>, basis: &[usize], tol: f64) -> Result<DMatrix<f64>> {
    let (n, d) = u.shape();
    let alpha = basis.len();
    if alpha == 0 {
        return Err(Error::invalid("basis must be nonempty"));
    }
    if alpha > d {
        return Err(Error::invalid(format!(
            "basis size {alpha} exceeds feature dimension {d}"
        )));
    }
    let mut seen = vec![false; n];
    for &item in basis {
        if item >= n {
            return Err(Error::invalid(format!("basis item {item} out of range")));
        }
        if std::mem::replace(&mut seen[item], true) {
            return Err(Error::invalid(format!("duplicate basis item {item}")));
        }
    }

    // d x alpha system shared by every item.
    let basis_rows = u.select_rows(basis.iter());
    let system = basis_rows.transpose();
    let svd = system.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > tol * sigma_max)
        .count();
    if sigma_max == 0.0 || rank < alpha {
        return Err(Error::RankDeficientBasis {
            rank,
            expected: alpha,
        });
    }

    let mut b = DMatrix::<f64>::zeros(n, alpha);
    for (item, &is_basis) in seen.iter().enumerate() {
        if is_basis {
            continue;
        }
        let target = DVector::from_iterator(d, u.row(item).iter().copied());
        let coeffs = svd
            .solve(&target, f64::EPSILON * sigma_max)
            .map_err(|m| Error::invalid(m.to_string()))?;
        let residual = (&system * &coeffs - &target).abs().max();
        let scale = 1.0 + target.abs().max();
        if residual > tol * scale {
            return Err(Error::OutsideSpan { item, residual });
        }
        b.row_mut(item).copy_from(&coeffs.transpose());
    }
    for (pos, &item) in basis.iter().enumerate() {
        b[(item, pos)] = 1.0;
    }
    Ok(b)
}

/// Smallest nonzero and largest eigenvalues of `B^T B` (eigenvalues below
/// `1e-12 * lambda_max` count as zero).
pub fn basis_condition(b: &DMatrix<f64>) -> Result<(f64, f64)> {
    let btb = b.transpose() * b;
    let eigen = SymmetricEigen::new(btb);
    let lambda_max = eigen.eigenvalues.max();
    if lambda_max <= 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    let threshold = 1e-12 * lambda_max;
    let lambda_min_nz = eigen
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > threshold)
        .fold(f64::INFINITY, f64::min);
    Ok((lambda_min_nz, lambda_max))
}
