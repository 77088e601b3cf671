//! Error metrics, sample-complexity sweeps, and the computable recovery
//! bound evaluators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::features::basis_condition;
use crate::graph::pair_count;
use crate::model::{preference, ModelForm};

/// Gauge alignment applied before measuring the normalized l2 error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alignment {
    /// No alignment: `||theta_hat - theta|| / ||theta||`.
    #[serde(rename = "raw")]
    Raw,
    /// Best sign flip of the estimate.
    #[serde(rename = "sign")]
    Sign,
    /// Best sign flip and uniform shift of the estimate.
    #[serde(rename = "sign-shift")]
    SignShift,
}

/// The gauge each estimator leaves free: comparison log-odds pin neither the
/// sign convention of Rank Centrality's stationary scale nor the per-shift of
/// pure difference solvers.
pub fn default_alignment(estimator: Estimator) -> Alignment {
    match estimator {
        Estimator::FbtlLs => Alignment::Sign,
        Estimator::Ols | Estimator::RankCentrality => Alignment::SignShift,
    }
}

/// Normalized l2 error under the chosen alignment.
pub fn l2_error(
    theta_hat: &DVector<f64>,
    theta: &DVector<f64>,
    alignment: Alignment,
) -> Result<f64> {
    if theta_hat.len() != theta.len() {
        return Err(Error::DimensionMismatch(format!(
            "estimate length {} vs truth length {}",
            theta_hat.len(),
            theta.len()
        )));
    }
    let scale = theta.norm();
    if scale == 0.0 {
        return Err(Error::invalid("true score vector must be nonzero"));
    }
    let err = match alignment {
        Alignment::Raw => (theta_hat - theta).norm(),
        Alignment::Sign => {
            let plus = (theta_hat - theta).norm();
            let minus = (-theta_hat - theta).norm();
            plus.min(minus)
        }
        Alignment::SignShift => {
            let mut best = f64::INFINITY;
            for s in [1.0, -1.0] {
                let diff = theta_hat * s - theta;
                let centered = diff.add_scalar(-diff.mean());
                best = best.min(centered.norm());
            }
            best
        }
    };
    Ok(err / scale)
}

/// Preference matrix induced by a score vector (diagonal 0.5).
pub fn preference_matrix(theta: &DVector<f64>, form: ModelForm) -> Result<DMatrix<f64>> {
    let n = theta.len();
    let mut p = DMatrix::from_element(n, n, 0.5);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[(i, j)] = preference(theta[i], theta[j], form)?;
            }
        }
    }
    Ok(p)
}

/// Pairwise disagreement: the fraction (normalized by n^2) of pairs whose
/// preferred item differs between the two matrices. Exact 0.5 entries never
/// count as a disagreement in either direction.
pub fn pd_error(p_hat: &DMatrix<f64>, p_star: &DMatrix<f64>) -> Result<f64> {
    let n = p_star.nrows();
    if p_star.ncols() != n || p_hat.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "preference matrices {:?} vs {:?}",
            p_hat.shape(),
            p_star.shape()
        )));
    }
    for m in [p_hat, p_star] {
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] + m[(j, i)] - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "preference matrix is not complementary at ({i}, {j})"
                    )));
                }
            }
        }
    }
    let mut disagreements = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let hat = p_hat[(i, j)];
            let star = p_star[(i, j)];
            if (hat > 0.5 && star < 0.5) || (hat < 0.5 && star > 0.5) {
                disagreements += 1;
            }
        }
    }
    Ok(disagreements as f64 / (n * n) as f64)
}

/// Pairwise disagreement of an estimated score vector against a preference
/// matrix; the estimate is expanded through the exponential form.
pub fn pd_error_from_scores(theta_hat: &DVector<f64>, p_star: &DMatrix<f64>) -> Result<f64> {
    let p_hat = preference_matrix(theta_hat, ModelForm::Exponential)?;
    pd_error(&p_hat, p_star)
}

/// Default sample-complexity grid: geometric from alpha up to C(n, 2) with
/// ratio 1.5.
pub fn default_m_grid(alpha: usize, n: usize) -> Vec<usize> {
    let total = pair_count(n);
    let mut grid = Vec::new();
    let mut x = alpha.max(1) as f64;
    loop {
        let m = (x.round() as usize).min(total);
        if grid.last().copied() != Some(m) {
            grid.push(m);
        }
        if m == total {
            break;
        }
        x *= 1.5;
    }
    grid
}

/// Smallest grid point whose mean trial error drops below `epsilon`;
/// `None` when the grid is exhausted. Trials run in parallel with derived
/// seeds (`base_seed ^ trial_index`) and are averaged in index order.
pub fn sample_complexity<F>(
    trial_error: F,
    epsilon: f64,
    trials: u32,
    m_grid: &[usize],
    base_seed: u64,
) -> Result<Option<usize>>
where
    F: Fn(usize, u64) -> f64 + Sync,
{
    if m_grid.is_empty() {
        return Err(Error::invalid("sample-complexity grid is empty"));
    }
    if m_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("sample-complexity grid must be ascending"));
    }
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    for &m in m_grid {
        let errors: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| trial_error(m, base_seed ^ t as u64))
            .collect();
        let mean = errors.iter().sum::<f64>() / trials as f64;
        if mean < epsilon {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Right-hand side of the recovery guarantee for the feature-aware least
/// squares estimate:
/// `(2/a) * sqrt(cond(B^T B)) * sqrt(m/alpha) * sqrt(lambda_n) / lambda_1`,
/// where the lambdas are the extreme nonzero eigenvalues of `B^T L B`.
pub fn ls_error_upper_bound(
    a: f64,
    b_mat: &DMatrix<f64>,
    laplacian: &DMatrix<f64>,
    m: usize,
    alpha: usize,
) -> Result<f64> {
    if a.is_nan() || a <= 0.0 {
        return Err(Error::invalid("score floor a must be positive"));
    }
    if alpha == 0 || m == 0 {
        return Err(Error::invalid("need m >= 1 and alpha >= 1"));
    }
    let reduced = b_mat.transpose() * laplacian * b_mat;
    let eigen = SymmetricEigen::new(reduced);
    let lambda_n = eigen.eigenvalues.max();
    if lambda_n <= 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    let threshold = 1e-12 * lambda_n;
    let lambda_1 = eigen
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > threshold)
        .fold(f64::INFINITY, f64::min);
    let (b_lo, b_hi) = basis_condition(b_mat)?;
    Ok(
        (2.0 / a) * (b_hi / b_lo).sqrt() * (m as f64 / alpha as f64).sqrt() * lambda_n.sqrt()
            / lambda_1,
    )
}

/// Minimax lower bound on the expected normalized error of any estimator:
/// `sqrt(lambda_min(B^T B)) / (16 b lambda_max(B^T B) sqrt(448 zeta K e^{2(b+1)}))`.
pub fn minimax_lower_bound(b_mat: &DMatrix<f64>, b: f64, zeta: f64, k: u64) -> Result<f64> {
    if b.is_nan() || b <= 0.0 || zeta.is_nan() || zeta <= 0.0 || k == 0 {
        return Err(Error::invalid("need b > 0, zeta > 0, and K >= 1"));
    }
    let btb = b_mat.transpose() * b_mat;
    let alpha = btb.nrows();
    let eigen = SymmetricEigen::new(btb);
    let lambda_max = eigen.eigenvalues.max();
    let lambda_min = eigen.eigenvalues.min();
    if lambda_max <= 0.0 || lambda_min <= 1e-12 * lambda_max {
        let rank = eigen
            .eigenvalues
            .iter()
            .filter(|&&l| l > 1e-12 * lambda_max)
            .count();
        return Err(Error::RankDeficientBasis {
            rank,
            expected: alpha,
        });
    }
    let inner = 448.0 * zeta * k as f64 * (2.0 * (b + 1.0)).exp();
    Ok(lambda_min.sqrt() / (16.0 * b * lambda_max * inner.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_random(n: usize, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let norm = v.norm();
        v / norm
    }

    #[test]
    fn l2_error_examples() {
        let theta = unit_random(10, 1);
        assert_eq!(l2_error(&theta, &theta, Alignment::Raw).unwrap(), 0.0);
        let flipped = -theta.clone();
        assert_eq!(l2_error(&flipped, &theta, Alignment::Sign).unwrap(), 0.0);
        assert!(l2_error(&flipped, &theta, Alignment::Raw).unwrap() > 1.9);

        // A spike on the first coordinate loses its mean under the shift
        // alignment: |delta| * sqrt(1 - 1/n).
        let n = 10;
        let delta = 0.37;
        let mut spiked = theta.clone();
        spiked[0] += delta;
        let expect = delta * (1.0 - 1.0 / n as f64).sqrt();
        let got = l2_error(&spiked, &theta, Alignment::SignShift).unwrap();
        assert!((got - expect).abs() < 1e-12);

        assert!(l2_error(&theta, &DVector::zeros(10), Alignment::Raw).is_err());
    }

    #[test]
    fn pd_error_examples() {
        let theta = unit_random(8, 2);
        let p = preference_matrix(&theta, ModelForm::Exponential).unwrap();
        assert_eq!(pd_error(&p, &p).unwrap(), 0.0);

        // Total disagreement: every strict preference flipped.
        let n = 8;
        let flipped = DMatrix::from_fn(n, n, |i, j| 1.0 - p[(i, j)]);
        let expect = (n * (n - 1) / 2) as f64 / (n * n) as f64;
        assert_eq!(pd_error(&flipped, &p).unwrap(), expect);
    }

    #[test]
    fn pd_error_ties_never_disagree() {
        let mut p_hat = DMatrix::from_element(3, 3, 0.5);
        let mut p_star = DMatrix::from_element(3, 3, 0.5);
        p_star[(0, 1)] = 0.9;
        p_star[(1, 0)] = 0.1;
        assert_eq!(pd_error(&p_hat, &p_star).unwrap(), 0.0);
        p_hat[(0, 1)] = 0.2;
        p_hat[(1, 0)] = 0.8;
        assert!(pd_error(&p_hat, &p_star).unwrap() > 0.0);
    }

    #[test]
    fn pd_error_matches_direct_pair_count() {
        // Oracle: count pairs the two orderings rank differently.
        let n = 10;
        let theta = unit_random(n, 3);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for t in (1..n).rev() {
            let s = rng.random_range(0..=t);
            perm.swap(t, s);
        }
        let permuted = DVector::from_fn(n, |i, _| theta[perm[i]]);
        let p_star = preference_matrix(&theta, ModelForm::Exponential).unwrap();
        let got = pd_error_from_scores(&permuted, &p_star).unwrap();

        let mut expect = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                let a = permuted[i] - permuted[j];
                let b = theta[i] - theta[j];
                if (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0) {
                    expect += 1;
                }
            }
        }
        assert_eq!(got, expect as f64 / (n * n) as f64);
    }

    #[test]
    fn pd_error_rejects_non_complementary_input() {
        let p = DMatrix::from_element(3, 3, 0.4);
        let q = DMatrix::from_element(3, 3, 0.5);
        assert!(pd_error(&p, &q).is_err());
    }

    #[test]
    fn sample_complexity_trivial_epsilon_and_monotonicity() {
        let trial = |m: usize, _seed: u64| 1.0 / m as f64;
        let grid = [1, 2, 4, 8, 16];
        assert_eq!(
            sample_complexity(trial, f64::INFINITY, 3, &grid, 0).unwrap(),
            Some(1)
        );
        let tight = sample_complexity(trial, 0.2, 3, &grid, 0).unwrap();
        assert_eq!(tight, Some(8));
        let loose = sample_complexity(trial, 0.6, 3, &grid, 0).unwrap();
        assert_eq!(loose, Some(2));
        assert!(loose.unwrap() <= tight.unwrap());
        assert_eq!(sample_complexity(trial, 1e-9, 3, &grid, 0).unwrap(), None);
        assert!(sample_complexity(trial, 0.5, 3, &[], 0).is_err());
        assert!(sample_complexity(trial, 0.5, 3, &[4, 2], 0).is_err());
    }

    #[test]
    fn upper_bound_closed_form_single_edge() {
        // B = I on two items, one observed pair: both extreme eigenvalues of
        // B^T L B equal 2 and the whole expression collapses to 1.
        let b = DMatrix::<f64>::identity(2, 2);
        let lap = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let rhs = ls_error_upper_bound(1.0, &b, &lap, 1, 2).unwrap();
        assert!((rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn upper_bound_scales_with_m_and_feature_scale() {
        let b = DMatrix::<f64>::identity(3, 3);
        let lap =
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        let base = ls_error_upper_bound(0.5, &b, &lap, 3, 3).unwrap();
        let doubled = ls_error_upper_bound(0.5, &b, &lap, 6, 3).unwrap();
        assert!((doubled / base - 2.0f64.sqrt()).abs() < 1e-12);

        // Scaling B by c leaves the condition number alone and divides
        // sqrt(lambda_n)/lambda_1 by c.
        let c = 2.5;
        let scaled = ls_error_upper_bound(0.5, &(&b * c), &lap, 3, 3).unwrap();
        assert!((scaled - base / c).abs() < 1e-12 * base);
    }

    #[test]
    fn lower_bound_value_and_scalings() {
        let b_mat = DMatrix::<f64>::identity(4, 4);
        let value = minimax_lower_bound(&b_mat, 1.0, 1.0, 1).unwrap();
        let expect = 1.0 / (16.0 * (448.0 * 4.0f64.exp()).sqrt());
        assert!((value - expect).abs() < 1e-15);
        assert!(value > 0.0);

        // Quadrupling K exactly halves the bound.
        let quartered = minimax_lower_bound(&b_mat, 1.0, 1.0, 4).unwrap();
        assert_eq!(value / quartered, 2.0);

        // Monotone decreasing in zeta and in b over a 5-point grid.
        let mut last = f64::INFINITY;
        for zeta in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let v = minimax_lower_bound(&b_mat, 1.0, zeta, 16).unwrap();
            assert!(v < last);
            last = v;
        }
        let mut last = f64::INFINITY;
        for b in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let v = minimax_lower_bound(&b_mat, b, 1.0, 16).unwrap();
            assert!(v < last);
            last = v;
        }

        let thin = DMatrix::<f64>::from_element(4, 2, 1.0);
        assert!(matches!(
            minimax_lower_bound(&thin, 1.0, 1.0, 1),
            Err(Error::RankDeficientBasis { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn pd_is_invariant_under_increasing_transforms(
            seed in 0u64..500,
            scale in 0.1f64..4.0,
            shift in -2.0f64..2.0,
        ) {
            let theta_hat = unit_random(7, seed);
            let theta = unit_random(7, seed.wrapping_add(1));
            let p_star = preference_matrix(&theta, ModelForm::Exponential).unwrap();
            let base = pd_error_from_scores(&theta_hat, &p_star).unwrap();
            let transformed = theta_hat.map(|x| scale * x + shift);
            let same = pd_error_from_scores(&transformed, &p_star).unwrap();
            prop_assert_eq!(base, same);
        }

        #[test]
        fn l2_alignment_never_exceeds_raw(seed in 0u64..500) {
            let theta = unit_random(6, seed);
            let theta_hat = unit_random(6, seed.wrapping_add(7));
            let raw = l2_error(&theta_hat, &theta, Alignment::Raw).unwrap();
            let sign = l2_error(&theta_hat, &theta, Alignment::Sign).unwrap();
            let shift = l2_error(&theta_hat, &theta, Alignment::SignShift).unwrap();
            prop_assert!(sign <= raw + 1e-15);
            prop_assert!(shift <= sign + 1e-15);
        }
    }
}
