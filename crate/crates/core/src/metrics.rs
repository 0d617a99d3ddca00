//! Confusion matrices, multi-class imbalance metrics and average ranks.
//!
//! * `AvAcc` is the mean per-class recall.
//! * `CBA` divides each diagonal entry by the larger of its row and column sums.
//! * `MAvG` is the geometric mean of the per-class recalls.

use std::fmt;

use crate::error::{Error, Result};

/// `M x M` counts; entry `(i, j)` counts true class `i` predicted as `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let m = rows.len();
        let mut cm = Self::zeros(m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    found: row.len(),
                });
            }
            cm.counts[i * m..(i + 1) * m].copy_from_slice(row);
        }
        Ok(cm)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.num_classes + predicted]
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        (0..self.num_classes).map(|j| self.get(class, j)).sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        (0..self.num_classes).map(|i| self.get(i, class)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|i| self.get(i, i)).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.num_classes.max(1))
            .map(<[u64]>::to_vec)
            .collect()
    }

    /// Recall of every class; errors if a class never occurs in the truth.
    pub fn recalls(&self) -> Result<Vec<f64>> {
        (0..self.num_classes)
            .map(|i| match self.row_sum(i) {
                0 => Err(Error::AbsentClass(i)),
                n => Ok(self.get(i, i) as f64 / n as f64),
            })
            .collect()
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.to_rows() {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>6}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyConfusion);
    }
    let mut cm = ConfusionMatrix::zeros(num_classes);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange { label, num_classes });
            }
        }
        cm.counts[t * num_classes + p] += 1;
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::EmptyConfusion),
        total => Ok(cm.trace() as f64 / total as f64),
    }
}

pub fn avacc(cm: &ConfusionMatrix) -> Result<f64> {
    let recalls = cm.recalls()?;
    if recalls.is_empty() {
        return Err(Error::EmptyConfusion);
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

pub fn cba(cm: &ConfusionMatrix) -> Result<f64> {
    let m = cm.num_classes();
    if m == 0 {
        return Err(Error::EmptyConfusion);
    }
    let mut sum = 0.0;
    for i in 0..m {
        let denom = cm.row_sum(i).max(cm.col_sum(i));
        if denom == 0 {
            return Err(Error::UndefinedClassBalance(i));
        }
        sum += cm.get(i, i) as f64 / denom as f64;
    }
    Ok(sum / m as f64)
}

pub fn mavg(cm: &ConfusionMatrix) -> Result<f64> {
    let recalls = cm.recalls()?;
    if recalls.is_empty() {
        return Err(Error::EmptyConfusion);
    }
    if recalls.contains(&0.0) {
        return Ok(0.0);
    }
    Ok(recalls.iter().product::<f64>().powf(1.0 / recalls.len() as f64))
}

/// Ranks of one cell's scores: 1 = best, tied scores share the mean rank.
pub fn rank_cell(scores: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let o = scores[a].total_cmp(&scores[b]);
        if higher_is_better {
            o.reverse()
        } else {
            o
        }
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let mean = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

/// Mean rank of each method (column) across cells (rows).
pub fn average_ranks(scores: &[Vec<f64>], higher_is_better: bool) -> Result<Vec<f64>> {
    let methods = scores
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Config("average ranks need at least one cell".into()))?;
    let mut totals = vec![0.0; methods];
    for (cell, row) in scores.iter().enumerate() {
        if row.len() != methods {
            return Err(Error::LengthMismatch {
                expected: methods,
                found: row.len(),
            });
        }
        if let Some(method) = row.iter().position(|v| v.is_nan()) {
            return Err(Error::NanScore { cell, method });
        }
        for (t, r) in totals.iter_mut().zip(rank_cell(row, higher_is_better)) {
            *t += r;
        }
    }
    Ok(totals.into_iter().map(|t| t / scores.len() as f64).collect())
}
