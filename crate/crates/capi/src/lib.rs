//! C ABI over the fbtl ranking library.
//!
//! Conventions: opaque handles with explicit `_free` functions, status codes
//! on every fallible call, results written through out-pointers. Item
//! indices are 0-based here (the text file formats stay 1-based). Call
//! [`fbtl_last_error`] for the message behind a non-OK status.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::str::FromStr;

use nalgebra::DMatrix;

use fbtl::dataset::greedy_basis;
use fbtl::error::Error;
use fbtl::estimators::estimate;
use fbtl::features::{CoeffMode, FeatureSet, DEFAULT_TOL};
use fbtl::graph::{EdgeCoverSets, Family, RelationGraph};
use fbtl::metrics::minimax_lower_bound;
use fbtl::model::ComparisonSample;
use fbtl::recovery::{closed_form_threshold, error_probability_bound};
use fbtl::Estimator;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FbtlStatus {
    Ok = 0,
    /// A pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// Arguments were rejected (unknown name, bad dimension, bad value).
    InvalidArgument = 3,
    /// The computation is numerically degenerate or underdetermined.
    Numerical = 4,
    /// The requested family or operation has no implementation.
    Unsupported = 5,
    /// Filesystem error.
    Io = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.into());
}

fn status_of(err: &Error) -> FbtlStatus {
    match err {
        Error::InvalidParameter(_)
        | Error::DimensionMismatch(_)
        | Error::NotInIndependentSet(_)
        | Error::Parse { .. }
        | Error::EmptySample => FbtlStatus::InvalidArgument,
        Error::UnsupportedFamily(_) => FbtlStatus::Unsupported,
        Error::Io(_) => FbtlStatus::Io,
        _ => FbtlStatus::Numerical,
    }
}

fn fail(err: Error) -> FbtlStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

/// Copies the message for the most recent error on this thread into `buf`
/// (NUL-terminated, truncated to `cap`). Returns the full message length.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn fbtl_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fbtl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn parse_utf8<'a>(ptr: *const c_char) -> Result<&'a str, FbtlStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(FbtlStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        FbtlStatus::Utf8
    })
}

/// Opaque relation graph handle.
pub struct FbtlGraph(RelationGraph);

/// Opaque feature-set handle (features plus coefficient matrix).
pub struct FbtlFeatures(FeatureSet);

/// Builds a graph-family instance. `family` is one of `disconnected`,
/// `clique`, `r-cliques`, `d-regular`, `k-tree`, `star`, `cycle`; `param`
/// carries r, d, or k where applicable.
///
/// # Safety
/// `family` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fbtl_graph_family(
    family: *const c_char,
    n: usize,
    param: usize,
    seed: u64,
    out: *mut *mut FbtlGraph,
) -> FbtlStatus {
    if out.is_null() {
        set_error("null out pointer");
        return FbtlStatus::NullPointer;
    }
    let name = match parse_utf8(family) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let family = match Family::from_str(name) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    match RelationGraph::family(family, n, param, seed) {
        Ok(graph) => {
            *out = Box::into_raw(Box::new(FbtlGraph(graph)));
            FbtlStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Parses the edge-list text format (`n <count>` header, `independent`
/// line, one 1-based `i j` pair per line).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fbtl_graph_parse(
    text: *const c_char,
    out: *mut *mut FbtlGraph,
) -> FbtlStatus {
    if out.is_null() {
        set_error("null out pointer");
        return FbtlStatus::NullPointer;
    }
    let text = match parse_utf8(text) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match RelationGraph::from_edge_list_str(text) {
        Ok(graph) => {
            *out = Box::into_raw(Box::new(FbtlGraph(graph)));
            FbtlStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `graph` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn fbtl_graph_free(graph: *mut FbtlGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fbtl_graph_item_count(graph: *const FbtlGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n())
}

/// Size of the fixed maximal independent set.
///
/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fbtl_graph_alpha(graph: *const FbtlGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.alpha())
}

/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fbtl_graph_edge_count(graph: *const FbtlGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.edge_count())
}

/// Synthesizes features on a graph; `coeff_mode` 0 draws simplex rows,
/// 1 draws gaussian rows.
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fbtl_features_synthesize(
    graph: *const FbtlGraph,
    coeff_mode: c_int,
    seed: u64,
    out: *mut *mut FbtlFeatures,
) -> FbtlStatus {
    let Some(graph) = graph.as_ref() else {
        set_error("null graph handle");
        return FbtlStatus::NullPointer;
    };
    if out.is_null() {
        set_error("null out pointer");
        return FbtlStatus::NullPointer;
    }
    let mode = match coeff_mode {
        0 => CoeffMode::UniformSimplex,
        1 => CoeffMode::Gaussian,
        other => {
            set_error(format!("unknown coefficient mode {other}"));
            return FbtlStatus::InvalidArgument;
        }
    };
    match FeatureSet::synthesize(&graph.0, mode, seed) {
        Ok(features) => {
            *out = Box::into_raw(Box::new(FbtlFeatures(features)));
            FbtlStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Wraps an explicit row-major `n x d` feature matrix. With `alpha > 0`,
/// `basis` names the `alpha` independent items (0-based); with `alpha == 0`
/// a maximal independent row set is selected by pivoted elimination and must
/// reach rank `d`.
///
/// # Safety
/// `values` must hold `n * d` doubles; `basis` must hold `alpha` indices
/// when `alpha > 0`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fbtl_features_from_matrix(
    values: *const f64,
    n: usize,
    d: usize,
    basis: *const usize,
    alpha: usize,
    out: *mut *mut FbtlFeatures,
) -> FbtlStatus {
    if values.is_null() || out.is_null() || (alpha > 0 && basis.is_null()) {
        set_error("null pointer argument");
        return FbtlStatus::NullPointer;
    }
    if n == 0 || d == 0 {
        set_error("feature matrix must be nonempty");
        return FbtlStatus::InvalidArgument;
    }
    let data = std::slice::from_raw_parts(values, n * d);
    let u = DMatrix::from_row_slice(n, d, data);
    let basis = if alpha > 0 {
        std::slice::from_raw_parts(basis, alpha).to_vec()
    } else {
        let picked = greedy_basis(&u, DEFAULT_TOL);
        if picked.len() < d {
            return fail(Error::RankDeficientBasis {
                rank: picked.len(),
                expected: d,
            });
        }
        picked
    };
    match FeatureSet::from_features(u, basis, DEFAULT_TOL) {
        Ok(features) => {
            *out = Box::into_raw(Box::new(FbtlFeatures(features)));
            FbtlStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `features` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn fbtl_features_free(features: *mut FbtlFeatures) {
    if !features.is_null() {
        drop(Box::from_raw(features));
    }
}

/// # Safety
/// `features` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fbtl_features_item_count(features: *const FbtlFeatures) -> usize {
    features.as_ref().map_or(0, |f| f.0.n())
}

/// # Safety
/// `features` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fbtl_features_alpha(features: *const FbtlFeatures) -> usize {
    features.as_ref().map_or(0, |f| f.0.alpha())
}

/// Copies the `n x alpha` coefficient matrix, row-major, into `out`.
///
/// # Safety
/// `features` must be a live handle; `out` must hold `n * alpha` doubles.
#[no_mangle]
pub unsafe extern "C" fn fbtl_features_coefficients(
    features: *const FbtlFeatures,
    out: *mut f64,
) -> FbtlStatus {
    let Some(features) = features.as_ref() else {
        set_error("null features handle");
        return FbtlStatus::NullPointer;
    };
    if out.is_null() {
        set_error("null out pointer");
        return FbtlStatus::NullPointer;
    }
    let b = features.0.b();
    let (n, alpha) = b.shape();
    let dst = std::slice::from_raw_parts_mut(out, n * alpha);
    for i in 0..n {
        for j in 0..alpha {
            dst[i * alpha + j] = b[(i, j)];
        }
    }
    FbtlStatus::Ok
}

/// Estimates item scores from aggregate comparison counts.
///
/// `pairs` holds `m` index pairs `(i_e, j_e)` interleaved as
/// `[i_0, j_0, i_1, j_1, ...]` (0-based); `wins[e]` counts how often `i_e`
/// beat `j_e` out of `k` comparisons. `estimator` selects 0 = feature-aware
/// least squares, 1 = ordinary least squares, 2 = Rank Centrality. Scores
/// are written to `theta_out` (length `n`), unit-normalized.
///
/// # Safety
/// `features` must be a live handle; `pairs` must hold `2 * m` indices;
/// `wins` must hold `m` counts; `theta_out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn fbtl_estimate(
    features: *const FbtlFeatures,
    pairs: *const usize,
    wins: *const u64,
    m: usize,
    k: u64,
    estimator: c_int,
    theta_out: *mut f64,
) -> FbtlStatus {
    let Some(features) = features.as_ref() else {
        set_error("null features handle");
        return FbtlStatus::NullPointer;
    };
    if pairs.is_null() || wins.is_null() || theta_out.is_null() {
        set_error("null pointer argument");
        return FbtlStatus::NullPointer;
    }
    let which = match estimator {
        0 => Estimator::FbtlLs,
        1 => Estimator::Ols,
        2 => Estimator::RankCentrality,
        other => {
            set_error(format!("unknown estimator {other}"));
            return FbtlStatus::InvalidArgument;
        }
    };
    if k == 0 {
        set_error("need at least one comparison per pair");
        return FbtlStatus::InvalidArgument;
    }
    let pair_slice = std::slice::from_raw_parts(pairs, 2 * m);
    let win_slice = std::slice::from_raw_parts(wins, m);
    let mut counts = Vec::with_capacity(m);
    for e in 0..m {
        let (i, j) = (pair_slice[2 * e], pair_slice[2 * e + 1]);
        let w = win_slice[e];
        if w > k {
            set_error(format!("pair {e} has more wins than comparisons"));
            return FbtlStatus::InvalidArgument;
        }
        counts.push((i, j, w, k - w));
    }
    let n = features.0.n();
    if let Some(&(i, j, ..)) = counts.iter().find(|&&(i, j, ..)| i >= n || j >= n) {
        set_error(format!("pair ({i}, {j}) out of range for {n} items"));
        return FbtlStatus::InvalidArgument;
    }
    let sample = match ComparisonSample::from_counts(&counts) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    match estimate(which, &features.0, &sample) {
        Ok(report) => {
            let dst = std::slice::from_raw_parts_mut(theta_out, n);
            dst.copy_from_slice(report.theta_hat.as_slice());
            FbtlStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Closed-form minimum sampling probability for recovery with probability
/// `1 - delta`, for the families that admit one.
///
/// # Safety
/// `family` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fbtl_closed_form_threshold(
    family: *const c_char,
    n: usize,
    param: usize,
    delta: f64,
    out: *mut f64,
) -> FbtlStatus {
    if out.is_null() {
        set_error("null out pointer");
        return FbtlStatus::NullPointer;
    }
    let name = match parse_utf8(family) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let family = match Family::from_str(name) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    match closed_form_threshold(family, n, param, delta) {
        Ok(p) => {
            *out = p;
            FbtlStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Upper bound on the probability that pairs sampled with rate `p` fail to
/// pin down every basis score (subsets enumerated up to size `q_max`).
///
/// # Safety
/// `graph` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fbtl_error_probability_bound(
    graph: *const FbtlGraph,
    p: f64,
    q_max: usize,
    out: *mut f64,
) -> FbtlStatus {
    let Some(graph) = graph.as_ref() else {
        set_error("null graph handle");
        return FbtlStatus::NullPointer;
    };
    if out.is_null() {
        set_error("null out pointer");
        return FbtlStatus::NullPointer;
    }
    let cover = EdgeCoverSets::from_graph(&graph.0);
    match error_probability_bound(&cover, p, q_max) {
        Ok(bound) => {
            *out = bound;
            FbtlStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Minimax lower bound on the expected normalized score error for the
/// feature structure held by `features`.
///
/// # Safety
/// `features` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fbtl_minimax_lower_bound(
    features: *const FbtlFeatures,
    b: f64,
    zeta: f64,
    k: u64,
    out: *mut f64,
) -> FbtlStatus {
    let Some(features) = features.as_ref() else {
        set_error("null features handle");
        return FbtlStatus::NullPointer;
    };
    if out.is_null() {
        set_error("null out pointer");
        return FbtlStatus::NullPointer;
    }
    match minimax_lower_bound(features.0.b(), b, zeta, k) {
        Ok(value) => {
            *out = value;
            FbtlStatus::Ok
        }
        Err(e) => fail(e),
    }
}
