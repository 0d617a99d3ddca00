//! Class counts produced by imbalance induction, without touching any data.

use std::fmt::Write as _;

use super::config::{DatasetSource, ExperimentConfig};
use super::grid::format_ir;
use crate::error::Result;
use crate::imbalance::{class_ratios, target_counts, RatioMode, Scenario};

#[derive(Clone, Debug, PartialEq)]
pub struct DistributionRow {
    pub scenario: Scenario,
    pub ir: f64,
    pub total: usize,
    /// Counts along the class order; position 0 is never a minority under
    /// the linear scenario.
    pub counts: Vec<usize>,
}

pub fn describe_imbalance(
    scenarios: &[Scenario],
    levels: &[f64],
    n_per_class: usize,
    num_classes: usize,
    mode: RatioMode,
) -> Result<Vec<DistributionRow>> {
    let mut rows = Vec::new();
    for &scenario in scenarios {
        for &ir in levels {
            let counts = target_counts(&class_ratios(scenario, ir, num_classes, mode)?, n_per_class)?;
            rows.push(DistributionRow {
                scenario,
                ir,
                total: counts.iter().sum(),
                counts,
            });
        }
    }
    Ok(rows)
}

/// `(n_per_class, num_classes)` of the configured dataset; CSV data uses its
/// smallest class.
pub fn dataset_shape(cfg: &ExperimentConfig) -> Result<(usize, usize)> {
    match &cfg.dataset {
        DatasetSource::Synthetic(spec) => Ok((spec.samples_per_class, spec.num_classes)),
        DatasetSource::Csv(_) => {
            let ds = cfg.dataset.load(cfg.master_seed)?;
            let n = ds.class_counts().into_iter().min().unwrap_or(0);
            Ok((n, ds.num_classes()))
        }
    }
}

pub fn describe_config(cfg: &ExperimentConfig) -> Result<Vec<DistributionRow>> {
    let (n, m) = dataset_shape(cfg)?;
    describe_imbalance(&cfg.scenarios, &cfg.ir_levels, n, m, cfg.ratio_mode)
}

/// `scenario,ir,total,c1..cM`.
pub fn distribution_csv(rows: &[DistributionRow]) -> String {
    let m = rows.iter().map(|r| r.counts.len()).max().unwrap_or(0);
    let mut out = String::from("scenario,ir,total");
    for i in 1..=m {
        let _ = write!(out, ",c{i}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{},{}", r.scenario, format_ir(r.ir), r.total);
        for c in &r.counts {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
    }
    out
}
