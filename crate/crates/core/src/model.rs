//! Preference model over item scores and the two-stage sampling process:
//! pair selection, then repeated Bernoulli comparisons per pair.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::graph::{all_pairs, pair_count, Pair};

/// Functional form mapping a score pair to a preference probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelForm {
    /// `P(i beats j) = e^{theta_i} / (e^{theta_i} + e^{theta_j})`.
    #[serde(rename = "exponential")]
    Exponential,
    /// `P(i beats j) = theta_i / (theta_i + theta_j)`, scores positive.
    #[serde(rename = "multiplicative")]
    Multiplicative,
}

impl fmt::Display for ModelForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelForm::Exponential => f.write_str("exponential"),
            ModelForm::Multiplicative => f.write_str("multiplicative"),
        }
    }
}

impl FromStr for ModelForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" | "exp" => Ok(ModelForm::Exponential),
            "multiplicative" | "mult" => Ok(ModelForm::Multiplicative),
            other => Err(Error::invalid(format!("unknown model form `{other}`"))),
        }
    }
}

/// Preference probability for a single score pair.
///
/// Branching on the score order makes the two orientations of a pair share
/// every intermediate value, so `preference(x, y) + preference(y, x)` is
/// exactly 1.0.
pub fn preference(theta_i: f64, theta_j: f64, form: ModelForm) -> Result<f64> {
    match form {
        ModelForm::Exponential => {
            let d = theta_i - theta_j;
            if d <= 0.0 {
                let t = d.exp();
                Ok(t / (1.0 + t))
            } else {
                let t = (-d).exp();
                Ok(1.0 - t / (1.0 + t))
            }
        }
        ModelForm::Multiplicative => {
            if theta_i <= 0.0 {
                return Err(Error::NonPositiveScore {
                    item: 0,
                    value: theta_i,
                });
            }
            if theta_j <= 0.0 {
                return Err(Error::NonPositiveScore {
                    item: 1,
                    value: theta_j,
                });
            }
            if theta_i <= theta_j {
                Ok(theta_i / (theta_i + theta_j))
            } else {
                Ok(1.0 - theta_j / (theta_i + theta_j))
            }
        }
    }
}

/// Score vector with its preference form and the score-magnitude range
/// `a <= |theta_basis|`, `|theta| <= b` used by the bound evaluators.
#[derive(Clone, Debug)]
pub struct FbtlModel {
    theta: DVector<f64>,
    form: ModelForm,
    a: f64,
    b: f64,
}

impl FbtlModel {
    /// Wraps an explicit score vector. The lower magnitude bound is taken
    /// over all items (a valid, possibly loose, bound for the basis).
    pub fn new(theta: DVector<f64>, form: ModelForm) -> Result<Self> {
        Self::with_basis(theta, form, None)
    }

    /// Scores from a weight vector: `theta_i = <w, u_i>`, optionally
    /// normalized to unit Euclidean norm.
    pub fn from_features(
        w: &DVector<f64>,
        features: &FeatureSet,
        form: ModelForm,
        normalize: bool,
    ) -> Result<Self> {
        if w.len() != features.dim() {
            return Err(Error::DimensionMismatch(format!(
                "weight dimension {} vs feature dimension {}",
                w.len(),
                features.dim()
            )));
        }
        let mut theta = features.u() * w;
        if normalize {
            let norm = theta.norm();
            if norm == 0.0 {
                return Err(Error::invalid("cannot normalize an all-zero score vector"));
            }
            theta /= norm;
        }
        Self::with_basis(theta, form, Some(features.basis()))
    }

    fn with_basis(theta: DVector<f64>, form: ModelForm, basis: Option<&[usize]>) -> Result<Self> {
        if form == ModelForm::Multiplicative {
            if let Some((item, &value)) = theta.iter().enumerate().find(|(_, &v)| v <= 0.0) {
                return Err(Error::NonPositiveScore { item, value });
            }
        }
        let a = match basis {
            Some(basis) => basis
                .iter()
                .map(|&i| theta[i].abs())
                .fold(f64::INFINITY, f64::min),
            None => theta.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min),
        };
        let b = theta.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Ok(Self { theta, form, a, b })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn form(&self) -> ModelForm {
        self.form
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    /// Lower bound on basis score magnitudes.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Upper bound on score magnitudes.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn preference(&self, i: usize, j: usize) -> f64 {
        // Scores were validated at construction, so this cannot fail.
        preference(self.theta[i], self.theta[j], self.form).expect("validated scores")
    }

    /// Exact log-odds `log(P_ij / P_ji)` computed in the form that keeps the
    /// algebraic identities exact: score difference for the exponential form,
    /// log-score difference for the multiplicative form.
    pub fn log_odds(&self, i: usize, j: usize) -> f64 {
        match self.form {
            ModelForm::Exponential => self.theta[i] - self.theta[j],
            ModelForm::Multiplicative => self.theta[i].ln() - self.theta[j].ln(),
        }
    }

    /// Full n x n preference matrix (diagonal 0.5).
    pub fn preference_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut p = DMatrix::from_element(n, n, 0.5);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    p[(i, j)] = self.preference(i, j);
                }
            }
        }
        p
    }
}

/// Includes each of the C(n, 2) unordered pairs independently with
/// probability `p` (Erdos-Renyi over pair slots), deterministically under
/// the seed.
pub fn sample_pairs(n: usize, p: f64, seed: u64) -> Result<Vec<Pair>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "pair probability {p} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}

/// Draws exactly `m` distinct pairs uniformly at random.
pub fn sample_pairs_exact(n: usize, m: usize, seed: u64) -> Result<Vec<Pair>> {
    let total = pair_count(n);
    if m > total {
        return Err(Error::invalid(format!(
            "cannot draw {m} distinct pairs out of {total}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates over pair ranks.
    let mut ranks: Vec<usize> = (0..total).collect();
    for t in 0..m {
        let pick = rng.random_range(t..total);
        ranks.swap(t, pick);
    }
    let pairs = all_pairs(n);
    let mut chosen: Vec<Pair> = ranks[..m].iter().map(|&r| pairs[r]).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Observed comparisons: per pair, the win count of the smaller-index item
/// out of `trials` comparisons, plus the clamped empirical preference and
/// log-odds.
///
/// `trials` is uniform for synthetic samples; aggregate datasets may carry a
/// different count per pair. A sample built from exact probabilities has
/// `trials = 0` everywhere and unclamped `p_hat`.
#[derive(Clone, Debug)]
pub struct ComparisonSample {
    pairs: Vec<Pair>,
    wins: Vec<u64>,
    trials: Vec<u64>,
    p_hat: Vec<f64>,
    y_hat: Vec<f64>,
}

impl ComparisonSample {
    /// Compares every pair in `pairs` independently `k` times under the
    /// model: `wins ~ Binomial(k, P(i beats j))`.
    pub fn draw(pairs: Vec<Pair>, model: &FbtlModel, k: u64, seed: u64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        if k == 0 {
            return Err(Error::invalid("need at least one comparison per pair"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut wins = Vec::with_capacity(pairs.len());
        for &(i, j) in &pairs {
            let p = model.preference(i, j);
            let w = Binomial::new(k, p)
                .map_err(|e| Error::invalid(e.to_string()))?
                .sample(&mut rng);
            wins.push(w);
        }
        let trials = vec![k; pairs.len()];
        Ok(Self::from_raw(pairs, wins, trials))
    }

    /// Compares pairs against an explicit preference matrix, `k` times each.
    pub fn draw_from_matrix(
        pairs: Vec<Pair>,
        p_star: &DMatrix<f64>,
        k: u64,
        seed: u64,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        if k == 0 {
            return Err(Error::invalid("need at least one comparison per pair"));
        }
        let n = p_star.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut wins = Vec::with_capacity(pairs.len());
        for &(i, j) in &pairs {
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "pair ({i}, {j}) out of range for the preference matrix"
                )));
            }
            let p = p_star[(i, j)];
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::DegenerateProbability { i, j, value: p });
            }
            let w = Binomial::new(k, p)
                .map_err(|e| Error::invalid(e.to_string()))?
                .sample(&mut rng);
            wins.push(w);
        }
        let trials = vec![k; pairs.len()];
        Ok(Self::from_raw(pairs, wins, trials))
    }

    /// Noiseless sample carrying the exact model probabilities.
    pub fn exact(pairs: Vec<Pair>, model: &FbtlModel) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut p_hat = Vec::with_capacity(pairs.len());
        let mut y_hat = Vec::with_capacity(pairs.len());
        for &(i, j) in &pairs {
            let p = model.preference(i, j);
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::DegenerateProbability { i, j, value: p });
            }
            p_hat.push(p);
            y_hat.push(model.log_odds(i, j));
        }
        let trials = vec![0; pairs.len()];
        let wins = vec![0; pairs.len()];
        Ok(Self {
            pairs,
            wins,
            trials,
            p_hat,
            y_hat,
        })
    }

    /// Aggregate counts `(i, j, wins_i, wins_j)`; pair orientation is
    /// canonicalized and per-pair totals may differ.
    pub fn from_counts(counts: &[(usize, usize, u64, u64)]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut pairs = Vec::with_capacity(counts.len());
        let mut wins = Vec::with_capacity(counts.len());
        let mut trials = Vec::with_capacity(counts.len());
        for &(i, j, wi, wj) in counts {
            if i == j {
                return Err(Error::invalid(format!(
                    "comparison of item {i} with itself"
                )));
            }
            let total = wi + wj;
            if total == 0 {
                return Err(Error::invalid(format!(
                    "pair ({i}, {j}) has zero comparisons"
                )));
            }
            let (a, b, wa) = if i < j { (i, j, wi) } else { (j, i, wj) };
            pairs.push((a, b));
            wins.push(wa);
            trials.push(total);
        }
        Ok(Self::from_raw(pairs, wins, trials))
    }

    fn from_raw(pairs: Vec<Pair>, wins: Vec<u64>, trials: Vec<u64>) -> Self {
        let mut p_hat = Vec::with_capacity(pairs.len());
        let mut y_hat = Vec::with_capacity(pairs.len());
        for e in 0..pairs.len() {
            let k = trials[e] as f64;
            // Continuity correction keeps the log-odds finite.
            let clamped = (wins[e] as f64 / k).clamp(1.0 / (2.0 * k), 1.0 - 1.0 / (2.0 * k));
            p_hat.push(clamped);
            y_hat.push((clamped / (1.0 - clamped)).ln());
        }
        Self {
            pairs,
            wins,
            trials,
            p_hat,
            y_hat,
        }
    }

    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn wins(&self) -> &[u64] {
        &self.wins
    }

    pub fn trials(&self) -> &[u64] {
        &self.trials
    }

    /// The common per-pair comparison count, when there is one.
    pub fn uniform_trials(&self) -> Option<u64> {
        let k = *self.trials.first()?;
        self.trials.iter().all(|&t| t == k).then_some(k)
    }

    /// True when the sample carries exact probabilities instead of counts.
    pub fn is_exact(&self) -> bool {
        self.trials.iter().all(|&t| t == 0)
    }

    /// Empirical preference for the stored orientation (smaller index wins).
    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    /// Empirical log-odds for the stored orientation.
    pub fn y_hat(&self) -> &[f64] {
        &self.y_hat
    }

    /// Log-odds for an arbitrary orientation; exactly antisymmetric.
    pub fn y_for(&self, e: usize, i: usize, j: usize) -> f64 {
        let (a, b) = self.pairs[e];
        if (i, j) == (a, b) {
            self.y_hat[e]
        } else {
            debug_assert_eq!((j, i), (a, b));
            -self.y_hat[e]
        }
    }
}
