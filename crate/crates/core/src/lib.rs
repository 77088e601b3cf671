//! Ranking from pairwise comparisons with item features.
//!
//! Items are related through a *relation graph*: the features of the items in
//! a fixed maximal independent set form a basis, and every other item's
//! feature vector (hence its score) is a known linear combination of basis
//! features. Comparisons follow a Bradley-Terry-Luce style model on the
//! scores, in either the exponential (softmax of scores) or multiplicative
//! (classic BTL on positive scores) form.
//!
//! The crate provides:
//!
//! - graph family generators, pair-coverage sets, and the combinatorial
//!   machinery behind the sample-complexity bounds ([`graph`]),
//! - feature synthesis and the coefficient matrix expressing items in the
//!   basis ([`features`]),
//! - the preference model and the two-stage sampling process ([`model`]),
//! - exact noiseless recovery, the bipartite-matching solvability oracle, and
//!   bound evaluators ([`recovery`]),
//! - the feature-aware least-squares estimator plus feature-blind baselines
//!   (ordinary least squares on the comparison graph, Rank Centrality)
//!   ([`estimators`]),
//! - error metrics and sample-complexity sweeps ([`metrics`]),
//! - dataset loaders and the reproducible experiment harness behind the CLI
//!   ([`dataset`], [`experiment`]).

pub mod dataset;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod features;
pub mod graph;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod recovery;

pub use error::{Error, Result};
pub use estimators::{fbtl_ls, ols, rank_centrality, EstimateReport, Estimator, IncidenceMatrix};
pub use features::{basis_condition, compute_coefficients, CoeffMode, FeatureSet};
pub use graph::{EdgeCoverSets, Family, Pair, RelationGraph};
pub use metrics::{l2_error, pd_error, sample_complexity, Alignment};
pub use model::{preference, sample_pairs, ComparisonSample, FbtlModel, ModelForm};
pub use recovery::{
    build_equations, closed_form_threshold, error_probability_bound, hall_check, solve_noiseless,
    EquationSystem, MatchingResult,
};

/// Formats a float with 12 significant digits, the convention for all numeric
/// result output (metrics, bounds, console reports).
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_finite() {
        format!("{:.11e}", x)
    } else {
        format!("{x}")
    }
}
