//! Random undersampling, random oversampling and SMOTE.
//!
//! Every resampler rebalances to a uniform class distribution: RUS down to
//! the smallest class, ROS and SMOTE up to the largest. The `*_traced`
//! variants also report where each output row came from.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

pub const DEFAULT_SMOTE_K: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResamplerKind {
    NoResampling,
    Rus,
    Ros,
    Smote { k: usize },
}

impl ResamplerKind {
    pub fn smote() -> Self {
        ResamplerKind::Smote { k: DEFAULT_SMOTE_K }
    }

    pub fn resample(&self, ds: &Dataset, rng: &mut SeededRng) -> Result<Dataset> {
        Ok(self.resample_traced(ds, rng)?.0)
    }

    pub fn resample_traced(&self, ds: &Dataset, rng: &mut SeededRng) -> Result<(Dataset, Vec<Origin>)> {
        match *self {
            ResamplerKind::NoResampling => Ok((ds.clone(), (0..ds.len()).map(Origin::Kept).collect())),
            ResamplerKind::Rus => rus_traced(ds, rng),
            ResamplerKind::Ros => ros_traced(ds, rng),
            ResamplerKind::Smote { k } => smote_traced(ds, k, rng),
        }
    }
}

impl fmt::Display for ResamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResamplerKind::NoResampling => f.write_str("none"),
            ResamplerKind::Rus => f.write_str("rus"),
            ResamplerKind::Ros => f.write_str("ros"),
            ResamplerKind::Smote { k } if *k == DEFAULT_SMOTE_K => f.write_str("smote"),
            ResamplerKind::Smote { k } => write!(f, "smote{k}"),
        }
    }
}

impl FromStr for ResamplerKind {
    type Err = Error;

    /// `none`, `rus`, `ros`, `smote` (k = 5) or `smote<k>`, e.g. `smote3`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "none" => Ok(ResamplerKind::NoResampling),
            "rus" => Ok(ResamplerKind::Rus),
            "ros" => Ok(ResamplerKind::Ros),
            "smote" => Ok(ResamplerKind::smote()),
            other => other
                .strip_prefix("smote")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(|k| ResamplerKind::Smote { k })
                .ok_or_else(|| Error::Config(format!("unknown resampler `{s}`"))),
        }
    }
}

/// Provenance of one output row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Origin {
    /// Input row carried over unchanged.
    Kept(usize),
    /// Extra copy of an input row.
    Duplicate(usize),
    /// `base + lambda * (neighbor - base)`.
    Synthetic { base: usize, neighbor: usize, lambda: f64 },
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The `k` candidates nearest to `points[query]`, excluding the query itself.
/// Ties in distance go to the lower row index.
pub fn knn_indices(points: &Matrix, query: usize, k: usize, candidates: &[usize]) -> Result<Vec<usize>> {
    if !candidates.contains(&query) {
        return Err(Error::Config(format!("query {query} is not among the candidates")));
    }
    if candidates.len() < k + 1 {
        return Err(Error::Sampling(format!(
            "{} candidates cannot supply {k} neighbours",
            candidates.len()
        )));
    }
    if let Some(&index) = candidates.iter().find(|&&c| c >= points.rows()) {
        return Err(Error::IndexOutOfRange {
            index,
            len: points.rows(),
        });
    }
    let q = points.row(query);
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&c| c != query)
        .map(|&c| (euclidean(q, points.row(c)), c))
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k, by_distance);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_distance);
    Ok(scored.into_iter().map(|(_, i)| i).collect())
}

fn nonempty_classes(ds: &Dataset) -> Result<Vec<Vec<usize>>> {
    let by_class = ds.class_indices();
    match by_class.iter().position(Vec::is_empty) {
        Some(class) => Err(Error::EmptyClass(class)),
        None => Ok(by_class),
    }
}

pub fn rus(ds: &Dataset, rng: &mut SeededRng) -> Result<Dataset> {
    Ok(rus_traced(ds, rng)?.0)
}

pub fn ros(ds: &Dataset, rng: &mut SeededRng) -> Result<Dataset> {
    Ok(ros_traced(ds, rng)?.0)
}

pub fn smote(ds: &Dataset, k: usize, rng: &mut SeededRng) -> Result<Dataset> {
    Ok(smote_traced(ds, k, rng)?.0)
}

/// Keeps a uniform sample of `min_count` rows per class, in original row order.
pub fn rus_traced(ds: &Dataset, rng: &mut SeededRng) -> Result<(Dataset, Vec<Origin>)> {
    let by_class = nonempty_classes(ds)?;
    let target = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let mut keep = Vec::with_capacity(target * by_class.len());
    for rows in &by_class {
        keep.extend(index::sample(rng, rows.len(), target).into_iter().map(|i| rows[i]));
    }
    keep.sort_unstable();
    let out = ds.take_subset(&keep)?;
    Ok((out, keep.into_iter().map(Origin::Kept).collect()))
}

/// Keeps every row and appends uniform-with-replacement copies per class.
pub fn ros_traced(ds: &Dataset, rng: &mut SeededRng) -> Result<(Dataset, Vec<Origin>)> {
    let by_class = nonempty_classes(ds)?;
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut picks: Vec<usize> = (0..ds.len()).collect();
    let mut origins: Vec<Origin> = picks.iter().map(|&i| Origin::Kept(i)).collect();
    for rows in &by_class {
        for _ in rows.len()..target {
            let src = rows[rng.random_range(0..rows.len())];
            picks.push(src);
            origins.push(Origin::Duplicate(src));
        }
    }
    Ok((ds.take_subset(&picks)?, origins))
}

/// Keeps every row and appends `max_count - count_c` interpolated rows per class.
///
/// Each synthetic row picks a uniform base row of its class, a uniform
/// neighbour among the base's `min(k, count_c - 1)` nearest same-class rows
/// and `lambda ~ U[0, 1)`. A class with a single row is padded with copies.
pub fn smote_traced(ds: &Dataset, k: usize, rng: &mut SeededRng) -> Result<(Dataset, Vec<Origin>)> {
    if k == 0 {
        return Err(Error::Config("SMOTE needs k >= 1".into()));
    }
    let by_class = nonempty_classes(ds)?;
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut features = ds.features().clone();
    let mut labels = ds.labels().to_vec();
    let mut origins: Vec<Origin> = (0..ds.len()).map(Origin::Kept).collect();
    let mut synth = vec![0.0; ds.dim()];

    for (class, rows) in by_class.iter().enumerate() {
        let needed = target - rows.len();
        if needed == 0 {
            continue;
        }
        if rows.len() == 1 {
            for _ in 0..needed {
                features.push_row(ds.row(rows[0]))?;
                labels.push(class);
                origins.push(Origin::Duplicate(rows[0]));
            }
            continue;
        }
        let k_eff = k.min(rows.len() - 1);
        let mut neighbours: Vec<Option<Vec<usize>>> = vec![None; rows.len()];
        for _ in 0..needed {
            let slot = rng.random_range(0..rows.len());
            let base = rows[slot];
            if neighbours[slot].is_none() {
                neighbours[slot] = Some(knn_indices(ds.features(), base, k_eff, rows)?);
            }
            let nn = neighbours[slot].as_deref().unwrap_or_default();
            let neighbor = nn[rng.random_range(0..nn.len())];
            let lambda: f64 = rng.random();
            for ((s, &x), &y) in synth.iter_mut().zip(ds.row(base)).zip(ds.row(neighbor)) {
                *s = x + lambda * (y - x);
            }
            features.push_row(&synth)?;
            labels.push(class);
            origins.push(Origin::Synthetic { base, neighbor, lambda });
        }
    }
    let out = Dataset::new(features, labels, ds.num_classes())?;
    log::debug!(
        "smote(k={k}): {} -> {} rows, {} synthetic",
        ds.len(),
        out.len(),
        out.len() - ds.len()
    );
    Ok((out, origins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cmp::Ordering;

    fn ds(rows: &[Vec<f64>], labels: Vec<usize>, m: usize) -> Dataset {
        Dataset::new(Matrix::from_rows(rows).unwrap(), labels, m).unwrap()
    }

    fn counts_ds(counts: &[usize], seed: u64) -> Dataset {
        let mut rng = SeededRng::new(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                rows.push(vec![rng.random::<f64>() + c as f64, rng.random::<f64>()]);
                labels.push(c);
            }
        }
        ds(&rows, labels, counts.len())
    }

    fn row_cmp(a: &[f64], b: &[f64]) -> Ordering {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| a.len().cmp(&b.len()))
    }

    fn sorted_rows(d: &Dataset) -> Vec<(usize, Vec<f64>)> {
        let mut v: Vec<(usize, Vec<f64>)> = (0..d.len()).map(|i| (d.labels()[i], d.row(i).to_vec())).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0).then(row_cmp(&a.1, &b.1)));
        v
    }

    #[test]
    fn knn_on_a_line() {
        let pts = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        assert_eq!(knn_indices(&pts, 0, 2, &[0, 1, 2, 3]).unwrap(), vec![1, 2]);
        // Equidistant neighbours: lower index first.
        assert_eq!(knn_indices(&pts, 1, 2, &[0, 1, 2, 3]).unwrap(), vec![0, 2]);
        assert!(knn_indices(&pts, 0, 4, &[0, 1, 2, 3]).is_err());
        assert!(knn_indices(&pts, 0, 1, &[1, 2]).is_err());
    }

    #[test]
    fn knn_coincident_point_is_a_neighbour() {
        let pts = Matrix::from_rows(&[[5.0, 5.0], [0.0, 0.0], [5.0, 5.0]]).unwrap();
        assert_eq!(knn_indices(&pts, 0, 1, &[0, 1, 2]).unwrap(), vec![2]);
    }

    #[test]
    fn balanced_input_is_untouched() {
        let d = counts_ds(&[4, 4, 4], 1);
        for kind in [ResamplerKind::Rus, ResamplerKind::Ros, ResamplerKind::smote()] {
            let out = kind.resample(&d, &mut SeededRng::new(2)).unwrap();
            assert_eq!(sorted_rows(&out), sorted_rows(&d), "{kind}");
        }
    }

    #[test]
    fn rus_reduces_to_minimum() {
        let d = counts_ds(&[625, 62], 3);
        assert_eq!(rus(&d, &mut SeededRng::new(1)).unwrap().class_counts(), vec![62, 62]);
    }

    #[test]
    fn rus_fixed_seed_subset() {
        let d = counts_ds(&[5, 3], 4);
        let (a, oa) = rus_traced(&d, &mut SeededRng::new(77)).unwrap();
        let (b, ob) = rus_traced(&d, &mut SeededRng::new(77)).unwrap();
        assert_eq!(a, b);
        assert_eq!(oa, ob);
        assert_eq!(a.class_counts(), vec![3, 3]);
        // The whole minority class survives; three distinct majority rows are kept.
        let kept: Vec<usize> = oa
            .iter()
            .map(|o| match o {
                Origin::Kept(i) => *i,
                _ => unreachable!(),
            })
            .collect();
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
        assert!(kept.ends_with(&[5, 6, 7]));
    }

    #[test]
    fn ros_duplicates_minority_rows() {
        let d = counts_ds(&[4, 2], 5);
        let (out, origins) = ros_traced(&d, &mut SeededRng::new(9)).unwrap();
        assert_eq!(out.class_counts(), vec![4, 4]);
        for (i, o) in origins.iter().enumerate().skip(6) {
            let Origin::Duplicate(src) = *o else { panic!() };
            assert!(src == 4 || src == 5);
            assert_eq!(out.row(i), d.row(src));
        }
    }

    #[test]
    fn smote_on_identical_pair_reproduces_the_point() {
        let d = ds(
            &[
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                vec![2.0, 0.0],
                vec![7.0, 3.0],
                vec![7.0, 3.0],
            ],
            vec![0, 0, 0, 1, 1],
            2,
        );
        let out = smote(&d, 5, &mut SeededRng::new(0)).unwrap();
        assert_eq!(out.class_counts(), vec![3, 3]);
        assert_eq!(out.row(5), &[7.0, 3.0]);
    }

    #[test]
    fn smote_lone_row_is_copied() {
        let d = ds(&[vec![0.0], vec![1.0], vec![2.0], vec![9.0]], vec![0, 0, 0, 1], 2);
        let (out, origins) = smote_traced(&d, 5, &mut SeededRng::new(0)).unwrap();
        assert_eq!(out.class_counts(), vec![3, 3]);
        assert!(origins[4..].iter().all(|o| *o == Origin::Duplicate(3)));
    }

    #[test]
    fn empty_class_is_an_error() {
        let d = ds(&[vec![0.0], vec![1.0]], vec![0, 0], 2);
        for kind in [ResamplerKind::Rus, ResamplerKind::Ros, ResamplerKind::smote()] {
            assert!(matches!(
                kind.resample(&d, &mut SeededRng::new(0)),
                Err(Error::EmptyClass(1))
            ));
        }
    }

    #[test]
    fn names() {
        for s in ["none", "rus", "ros", "smote", "smote3"] {
            assert_eq!(s.parse::<ResamplerKind>().unwrap().to_string(), s);
        }
        assert_eq!("smote".parse::<ResamplerKind>().unwrap(), ResamplerKind::Smote { k: 5 });
        assert!("smote0".parse::<ResamplerKind>().is_err());
        assert!("adasyn".parse::<ResamplerKind>().is_err());
    }
}
