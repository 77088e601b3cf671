//! On-disk dataset bundle: feature CSV, aggregate pairwise win counts, and
//! the empirical preference matrix built from them.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::features::{FeatureSet, DEFAULT_TOL};
use crate::model::ComparisonSample;

/// A parsed dataset: features with their basis, the aggregate comparison
/// sample, and the empirical preference matrix (0.5 where no data exists).
#[derive(Clone, Debug)]
pub struct DatasetBundle {
    pub feature_path: PathBuf,
    pub counts_path: PathBuf,
    pub features: FeatureSet,
    pub sample: ComparisonSample,
    pub p_star: DMatrix<f64>,
}

/// Loads a bundle. When `basis` is `None`, a maximal set of d linearly
/// independent items is selected greedily by pivoted elimination; fewer than
/// d independent items is an error.
pub fn load_dataset(
    feature_path: &Path,
    counts_path: &Path,
    basis: Option<Vec<usize>>,
) -> Result<DatasetBundle> {
    let text = std::fs::read_to_string(feature_path)?;
    let u = parse_features_csv(&text)?;
    let n = u.nrows();
    let basis = match basis {
        Some(b) => b,
        None => {
            let d = u.ncols();
            let picked = greedy_basis(&u, DEFAULT_TOL);
            if picked.len() < d {
                return Err(Error::RankDeficientBasis {
                    rank: picked.len(),
                    expected: d,
                });
            }
            picked
        }
    };
    let features = FeatureSet::from_features(u, basis, DEFAULT_TOL)?;

    let text = std::fs::read_to_string(counts_path)?;
    let counts = parse_counts_csv(&text, n)?;
    let sample = ComparisonSample::from_counts(&counts)?;
    let p_star = empirical_preference_matrix(&counts, n);

    Ok(DatasetBundle {
        feature_path: feature_path.to_path_buf(),
        counts_path: counts_path.to_path_buf(),
        features,
        sample,
        p_star,
    })
}

/// Feature CSV: header `item,f1,...,fd`, one row per item, item ids 1..=n in
/// any order.
pub fn parse_features_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(0, "empty feature file"))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.first() != Some(&"item") || fields.len() < 2 {
        return Err(Error::parse(1, "header must be `item,f1,...,fd`"));
    }
    let d = fields.len() - 1;

    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != d + 1 {
            return Err(Error::parse(
                line_no,
                format!("expected {} fields, found {}", d + 1, cells.len()),
            ));
        }
        let id: usize = cells[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad item id `{}`", cells[0])))?;
        if id == 0 {
            return Err(Error::parse(line_no, "item ids are 1-based"));
        }
        let mut values = Vec::with_capacity(d);
        for cell in &cells[1..] {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad feature value `{cell}`")))?;
            values.push(v);
        }
        rows.push((id - 1, values));
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::parse(0, "feature file has no item rows"));
    }
    let mut u = DMatrix::<f64>::zeros(n, d);
    let mut seen = vec![false; n];
    for (id, values) in rows {
        if id >= n {
            return Err(Error::parse(
                0,
                format!("item id {} exceeds the row count {n}", id + 1),
            ));
        }
        if std::mem::replace(&mut seen[id], true) {
            return Err(Error::parse(0, format!("duplicate item id {}", id + 1)));
        }
        for (c, v) in values.into_iter().enumerate() {
            u[(id, c)] = v;
        }
    }
    Ok(u)
}

/// Renders features with round-trip float precision.
pub fn features_csv_string(u: &DMatrix<f64>) -> String {
    let d = u.ncols();
    let mut out = String::from("item");
    for c in 1..=d {
        out.push_str(&format!(",f{c}"));
    }
    out.push('\n');
    for i in 0..u.nrows() {
        out.push_str(&format!("{}", i + 1));
        for c in 0..d {
            out.push_str(&format!(",{}", u[(i, c)]));
        }
        out.push('\n');
    }
    out
}

/// Comparison counts CSV: header `i,j,wins_i,wins_j`, aggregate counts per
/// unordered pair, 1-based ids.
pub fn parse_counts_csv(text: &str, n: usize) -> Result<Vec<(usize, usize, u64, u64)>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(0, "empty counts file"))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields != ["i", "j", "wins_i", "wins_j"] {
        return Err(Error::parse(1, "header must be `i,j,wins_i,wins_j`"));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 4 {
            return Err(Error::parse(
                line_no,
                format!("expected 4 fields, found {}", cells.len()),
            ));
        }
        let id = |cell: &str| -> Result<usize> {
            let v: usize = cell
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad item id `{cell}`")))?;
            if v == 0 {
                return Err(Error::parse(line_no, "item ids are 1-based"));
            }
            if v > n {
                return Err(Error::parse(line_no, format!("unknown item id {v}")));
            }
            Ok(v - 1)
        };
        let i = id(cells[0])?;
        let j = id(cells[1])?;
        if i == j {
            return Err(Error::parse(
                line_no,
                format!("item {} compared with itself", i + 1),
            ));
        }
        let count = |cell: &str| -> Result<u64> {
            cell.parse()
                .map_err(|_| Error::parse(line_no, format!("bad win count `{cell}`")))
        };
        let wins_i = count(cells[2])?;
        let wins_j = count(cells[3])?;
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(Error::parse(
                line_no,
                format!("duplicate pair ({}, {})", i + 1, j + 1),
            ));
        }
        out.push((i, j, wins_i, wins_j));
    }
    if out.is_empty() {
        return Err(Error::parse(0, "counts file has no data rows"));
    }
    Ok(out)
}

pub fn counts_csv_string(sample: &ComparisonSample) -> String {
    let mut out = String::from("i,j,wins_i,wins_j\n");
    for (e, &(i, j)) in sample.pairs().iter().enumerate() {
        let wins = sample.wins()[e];
        let losses = sample.trials()[e] - wins;
        out.push_str(&format!("{},{},{},{}\n", i + 1, j + 1, wins, losses));
    }
    out
}

/// Empirical preference matrix from aggregate counts; 0.5 on the diagonal
/// and on pairs never compared.
pub fn empirical_preference_matrix(counts: &[(usize, usize, u64, u64)], n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::from_element(n, n, 0.5);
    for &(i, j, wi, wj) in counts {
        let total = (wi + wj) as f64;
        if total > 0.0 {
            let frac = wi as f64 / total;
            p[(i, j)] = frac;
            p[(j, i)] = 1.0 - frac;
        }
    }
    p
}

/// Greedy selection of linearly independent item rows by pivoted
/// elimination: repeatedly takes the item with the largest residual norm and
/// deflates the rest, until the residual mass drops below tolerance. The
/// returned indices are ascending.
pub fn greedy_basis(u: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let (n, d) = u.shape();
    let mut residual: Vec<nalgebra::DVector<f64>> =
        (0..n).map(|i| u.row(i).transpose().clone_owned()).collect();
    let scale = residual
        .iter()
        .map(|r| r.norm())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let mut used = vec![false; n];
    let mut chosen = Vec::new();
    for _ in 0..d {
        let mut best = usize::MAX;
        let mut best_norm = tol * scale;
        for (i, r) in residual.iter().enumerate() {
            if !used[i] {
                let norm = r.norm();
                if norm > best_norm {
                    best = i;
                    best_norm = norm;
                }
            }
        }
        if best == usize::MAX {
            break;
        }
        used[best] = true;
        chosen.push(best);
        let direction = &residual[best] / best_norm;
        for (i, r) in residual.iter_mut().enumerate() {
            if !used[i] {
                let proj = direction.dot(r);
                *r -= &direction * proj;
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::CoeffMode;
    use crate::graph::{Family, RelationGraph};
    use crate::model::{FbtlModel, ModelForm};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn features_round_trip_is_exact() {
        let g = RelationGraph::family(Family::RDisconnectedCliques, 10, 2, 0).unwrap();
        let f = FeatureSet::synthesize(&g, CoeffMode::Gaussian, 5).unwrap();
        let text = features_csv_string(f.u());
        let back = parse_features_csv(&text).unwrap();
        assert_eq!(&back, f.u());
    }

    #[test]
    fn feature_parse_errors_carry_line_numbers() {
        let err = parse_features_csv("item,f1\n1,0.5\n2,oops\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(parse_features_csv("foo,f1\n").is_err());
        let err = parse_features_csv("item,f1\n1,0.5\n1,0.7\n").unwrap_err();
        assert!(err.to_string().contains("duplicate item id 1"));
    }

    #[test]
    fn counts_reject_unknown_ids_by_name() {
        let err = parse_counts_csv("i,j,wins_i,wins_j\n1,27,3,4\n", 20).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("unknown item id 27"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn greedy_basis_finds_rank_and_respects_dependence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // Six items in R^3: three independent, three dependent copies.
        let mut u = DMatrix::<f64>::zeros(6, 3);
        for i in 0..3 {
            for c in 0..3 {
                u[(i, c)] = rng.random_range(-1.0..1.0);
            }
        }
        for i in 3..6 {
            let row = u.row(0) * 0.5 + u.row(i - 3) * 0.25;
            u.row_mut(i).copy_from(&row);
        }
        let basis = greedy_basis(&u, 1e-8);
        assert_eq!(basis.len(), 3);
        let picked = u.select_rows(basis.iter());
        let svd = picked.svd(false, false);
        assert!(svd.singular_values.min() > 1e-6);
    }

    #[test]
    fn car_shaped_bundle_selects_six_basis_items() {
        // Twenty items with six-dimensional features of full rank.
        let dir = tempfile::tempdir().unwrap();
        let dir = dir.path();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let u = DMatrix::<f64>::from_fn(20, 6, |_, _| rng.random_range(-1.0..1.0));
        let fpath = dir.join("features.csv");
        std::fs::write(&fpath, features_csv_string(&u)).unwrap();

        let theta = DVector::from_fn(20, |i, _| (i as f64 / 19.0) - 0.5);
        let model = FbtlModel::new(theta, ModelForm::Exponential).unwrap();
        let pairs = crate::graph::all_pairs(20);
        let sample = ComparisonSample::draw(pairs, &model, 40, 9).unwrap();
        let cpath = dir.join("counts.csv");
        std::fs::write(&cpath, counts_csv_string(&sample)).unwrap();

        let bundle = load_dataset(&fpath, &cpath, None).unwrap();
        assert_eq!(bundle.features.alpha(), 6);
        assert_eq!(bundle.p_star.nrows(), 20);
        assert_eq!(bundle.sample.m(), 190);
    }

    #[test]
    fn exported_bundle_reloads_to_identical_state() {
        let dir = tempfile::tempdir().unwrap();
        let dir = dir.path();
        let g = RelationGraph::family(Family::RDisconnectedCliques, 12, 3, 0).unwrap();
        let f = FeatureSet::synthesize(&g, CoeffMode::Gaussian, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = DVector::from_fn(f.dim(), |_, _| rng.random_range(-1.0..1.0));
        let model = FbtlModel::from_features(&w, &f, ModelForm::Exponential, true).unwrap();
        let pairs = crate::model::sample_pairs(12, 0.8, 4).unwrap();
        let sample = ComparisonSample::draw(pairs, &model, 25, 5).unwrap();

        let fpath = dir.join("features.csv");
        let cpath = dir.join("counts.csv");
        std::fs::write(&fpath, features_csv_string(f.u())).unwrap();
        std::fs::write(&cpath, counts_csv_string(&sample)).unwrap();

        let first = load_dataset(&fpath, &cpath, Some(f.basis().to_vec())).unwrap();
        let second = load_dataset(&fpath, &cpath, Some(f.basis().to_vec())).unwrap();
        assert_eq!(first.features.b(), second.features.b());
        assert_eq!(first.p_star, second.p_star);
        assert_eq!(first.sample.p_hat(), second.sample.p_hat());
        // Loaded coefficients agree with the generating ones.
        assert!((first.features.b() - f.b()).amax() < 1e-8);
    }

    #[test]
    fn dependent_features_fail_basis_selection() {
        let dir = tempfile::tempdir().unwrap();
        let dir = dir.path();
        // Rank-2 features in R^3.
        let mut u = DMatrix::<f64>::zeros(5, 3);
        for i in 0..5 {
            u[(i, 0)] = 1.0 + i as f64;
            u[(i, 1)] = 2.0 * (1.0 + i as f64);
        }
        let fpath = dir.join("features.csv");
        std::fs::write(&fpath, features_csv_string(&u)).unwrap();
        let cpath = dir.join("counts.csv");
        std::fs::write(&cpath, "i,j,wins_i,wins_j\n1,2,3,4\n").unwrap();
        let err = load_dataset(&fpath, &cpath, None).unwrap_err();
        assert!(matches!(err, Error::RankDeficientBasis { .. }));
    }
}
