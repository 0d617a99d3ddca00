//! Labelled feature matrices, CSV I/O and stratified fold assignment.
//!
//! The CSV layout is `label,f0,...,f{D-1}` with one observation per line.
//! Features are written in scientific notation with 17 significant digits so
//! that a save/load round trip is exact for `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

/// `N x D` features plus `N` labels in `[0, num_classes)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(Error::InvalidDataset("num_classes must be positive".into()));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        if !features.all_finite() {
            return Err(Error::NonFinite("dataset features".into()));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    /// Dataset with no rows but a fixed width and class count.
    pub fn empty(dim: usize, num_classes: usize) -> Self {
        Self {
            features: Matrix::zeros(0, dim),
            labels: Vec::new(),
            num_classes: num_classes.max(1),
        }
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Number of rows per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row indices of each class, ascending.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Rows in the order given by `indices`; duplicates allowed.
    pub fn take_subset(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&index) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::IndexOutOfRange { index, len: self.len() });
        }
        Ok(Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        })
    }

    /// Same labels and class count, new feature matrix (e.g. extracted features).
    pub fn with_features(&self, features: Matrix) -> Result<Dataset> {
        Dataset::new(features, self.labels.clone(), self.num_classes)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_csv(&text, path)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("label");
        for j in 0..self.dim() {
            write!(out, ",f{j}").unwrap();
        }
        out.push('\n');
        for (i, &label) in self.labels.iter().enumerate() {
            write!(out, "{label}").unwrap();
            for v in self.row(i) {
                write!(out, ",{v:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn parse_csv(text: &str, path: &Path) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns[0] != "label" {
        return Err(parse_err(1, "header must start with `label`".into()));
    }
    let dim = columns.len() - 1;
    for (j, name) in columns[1..].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(parse_err(1, format!("expected column `f{j}`, found `{name}`")));
        }
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(parse_err(
                line_no,
                format!("expected {} fields, found {}", dim + 1, fields.len()),
            ));
        }
        let label: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("invalid label `{}`", fields[0])))?;
        labels.push(label);
        for field in &fields[1..] {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line_no, format!("invalid feature value `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("non-finite feature value `{field}`")));
            }
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let num_classes = labels.iter().max().map_or(1, |&m| m + 1);
    let features = Matrix::new(labels.len(), dim, values)?;
    Dataset::new(features, labels, num_classes)
}

/// Fold index of every row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    num_folds: usize,
}

impl FoldAssignment {
    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn num_folds(&self) -> usize {
        self.num_folds
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    /// `(train, test)` for one fold, rows in original order.
    pub fn split(&self, ds: &Dataset, fold: usize) -> Result<(Dataset, Dataset)> {
        if ds.len() != self.fold_of.len() {
            return Err(Error::LengthMismatch {
                expected: self.fold_of.len(),
                found: ds.len(),
            });
        }
        Ok((
            ds.take_subset(&self.train_indices(fold))?,
            ds.take_subset(&self.test_indices(fold))?,
        ))
    }
}

/// Per class: shuffle the class's rows, then deal them round-robin to folds.
pub fn stratified_kfold(ds: &Dataset, k: usize, rng: &mut SeededRng) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    let by_class = ds.class_indices();
    if let Some((class, rows)) = by_class.iter().enumerate().find(|(_, r)| r.len() < k) {
        return Err(Error::TooFewSamples {
            class,
            count: rows.len(),
            needed: k,
        });
    }
    let mut fold_of = vec![0; ds.len()];
    for mut rows in by_class {
        rows.shuffle(rng);
        for (pos, row) in rows.into_iter().enumerate() {
            fold_of[row] = pos % k;
        }
    }
    Ok(FoldAssignment { fold_of, num_folds: k })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), text).unwrap();
        f
    }

    fn labelled(labels: Vec<usize>, m: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![i as f64]).collect();
        Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, m).unwrap()
    }

    #[test]
    fn loads_three_rows() {
        let f = write_tmp("label,f0,f1\n0,1.5,2\n1,-3,4e-2\n0,0,0\n");
        let ds = Dataset::load_csv(f.path()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.row(1), &[-3.0, 0.04]);
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let f = write_tmp("label,f0\n");
        assert!(matches!(Dataset::load_csv(f.path()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn negative_label_reports_line() {
        let f = write_tmp("label,f0\n0,1\n-1,2\n");
        match Dataset::load_csv(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_and_non_finite() {
        let f = write_tmp("label,f0,f1\n0,1\n");
        assert!(matches!(Dataset::load_csv(f.path()), Err(Error::Parse { line: 2, .. })));
        let f = write_tmp("label,f0\n0,inf\n");
        assert!(matches!(Dataset::load_csv(f.path()), Err(Error::Parse { line: 2, .. })));
        let f = write_tmp("label,f0\n1.0,3\n");
        assert!(matches!(Dataset::load_csv(f.path()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            Dataset::load_csv("/nonexistent/nowhere.csv"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn save_writes_full_precision() {
        let ds = Dataset::new(Matrix::new(1, 1, vec![0.1]).unwrap(), vec![0], 1).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        ds.save_csv(f.path()).unwrap();
        let text = fs::read_to_string(f.path()).unwrap();
        // 17 significant digits of the double nearest 0.1
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert_eq!(Dataset::load_csv(f.path()).unwrap(), ds);
    }

    #[test]
    fn save_rejects_empty() {
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(matches!(
            Dataset::empty(2, 2).save_csv(f.path()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn class_counts_examples() {
        assert_eq!(labelled(vec![0, 0, 1, 2], 3).class_counts(), vec![2, 1, 1]);
        assert_eq!(labelled(vec![0; 5], 2).class_counts(), vec![5, 0]);
        let balanced: Vec<usize> = (0..5000).map(|i| i % 8).collect();
        assert_eq!(labelled(balanced, 8).class_counts(), vec![625; 8]);
    }

    #[test]
    fn subset_identity_duplicates_and_empty() {
        let ds = labelled(vec![0, 1, 0, 1], 2);
        let all: Vec<usize> = (0..4).collect();
        assert_eq!(ds.take_subset(&all).unwrap(), ds);
        let dup = ds.take_subset(&[2, 2]).unwrap();
        assert_eq!(dup.len(), 2);
        assert_eq!(dup.row(0), ds.row(2));
        assert_eq!(dup.row(1), ds.row(2));
        let empty = ds.take_subset(&[]).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.dim(), 1);
        assert!(matches!(
            ds.take_subset(&[4]),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
    }

    #[test]
    fn kfold_one_sample_per_class_per_fold() {
        let ds = labelled((0..80).map(|i| i % 8).collect(), 8);
        let folds = stratified_kfold(&ds, 10, &mut SeededRng::new(3)).unwrap();
        for f in 0..10 {
            let test = ds.take_subset(&folds.test_indices(f)).unwrap();
            assert_eq!(test.class_counts(), vec![1; 8]);
        }
    }

    #[test]
    fn kfold_625_splits_into_63_and_62() {
        let ds = labelled(vec![0; 625], 1);
        let folds = stratified_kfold(&ds, 10, &mut SeededRng::new(11)).unwrap();
        let mut sizes: Vec<usize> = (0..10).map(|f| folds.test_indices(f).len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [vec![62; 5], vec![63; 5]].concat());
    }

    #[test]
    fn kfold_is_deterministic_and_validates() {
        let ds = labelled((0..40).map(|i| i % 4).collect(), 4);
        let a = stratified_kfold(&ds, 5, &mut SeededRng::new(5)).unwrap();
        let b = stratified_kfold(&ds, 5, &mut SeededRng::new(5)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            stratified_kfold(&ds, 11, &mut SeededRng::new(5)),
            Err(Error::TooFewSamples { needed: 11, .. })
        ));
        assert!(stratified_kfold(&ds, 1, &mut SeededRng::new(5)).is_err());
    }
}
