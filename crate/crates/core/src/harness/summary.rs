//! Aggregation of a results file: per-(scenario, IR, metric) means, overall
//! means with average ranks, and the baseline IR curve.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::grid::{format_ir, read_results, ResultRow, ERROR_METRIC, METRICS};
use crate::error::{Error, Result};
use crate::metrics::average_ranks;

pub const BY_SCENARIO_HEADER: &str = "scenario,ir,metric,strategy,mean,best";
pub const OVERALL_HEADER: &str = "strategy,metric,mean,avg_rank";
pub const CURVE_HEADER: &str = "scenario,metric,ir,mean,std";

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioRow {
    pub scenario: String,
    pub ir: f64,
    pub metric: String,
    pub strategy: String,
    /// Mean over folds.
    pub mean: f64,
    /// Highest mean among the strategies of this (scenario, IR, metric).
    pub best: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverallRow {
    pub strategy: String,
    pub metric: String,
    /// Mean over every (scenario, IR, fold) cell.
    pub mean: f64,
    /// Mean rank over the same cells, 1 = best.
    pub avg_rank: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub strategies: Vec<String>,
    pub by_scenario: Vec<ScenarioRow>,
    pub overall: Vec<OverallRow>,
}

fn push_unique<T: PartialEq + Clone>(v: &mut Vec<T>, x: &T) {
    if !v.contains(x) {
        v.push(x.clone());
    }
}

/// Summarises rows forming a full factorial over scenario x IR x fold x strategy.
///
/// Cells that are absent, incomplete or marked as failed make the input
/// ragged and are reported together in the error.
pub fn summarize_rows(rows: &[ResultRow]) -> Result<Summary> {
    let mut scenarios: Vec<String> = Vec::new();
    let mut irs: Vec<f64> = Vec::new();
    let mut folds: Vec<usize> = Vec::new();
    let mut strategies: Vec<String> = Vec::new();
    let mut values: HashMap<(String, String, usize, String, String), f64> = HashMap::new();
    for r in rows {
        push_unique(&mut scenarios, &r.scenario);
        push_unique(&mut irs, &r.ir);
        push_unique(&mut folds, &r.fold);
        push_unique(&mut strategies, &r.strategy);
        if r.metric == ERROR_METRIC {
            continue;
        }
        if !METRICS.contains(&r.metric.as_str()) {
            return Err(Error::InvalidDataset(format!("unknown metric `{}`", r.metric)));
        }
        let key = (
            r.scenario.clone(),
            format_ir(r.ir),
            r.fold,
            r.strategy.clone(),
            r.metric.clone(),
        );
        if values.insert(key, r.value).is_some() {
            return Err(Error::InvalidDataset(format!("duplicate result row `{}`", r.to_line())));
        }
    }
    if values.is_empty() {
        return Err(Error::IncompleteResults("no results to summarise".into()));
    }
    irs.sort_by(f64::total_cmp);
    folds.sort_unstable();

    let mut missing = Vec::new();
    for s in &scenarios {
        for &ir in &irs {
            for &f in &folds {
                for st in &strategies {
                    let absent: Vec<&str> = METRICS
                        .iter()
                        .copied()
                        .filter(|m| !values.contains_key(&(s.clone(), format_ir(ir), f, st.clone(), m.to_string())))
                        .collect();
                    if !absent.is_empty() {
                        missing.push(format!("{s},{},{f},{st} [{}]", format_ir(ir), absent.join(" ")));
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteResults(format!(
            "{} missing cell(s): {}",
            missing.len(),
            missing.join("; ")
        )));
    }
    let value = |s: &str, ir: f64, f: usize, st: &str, m: &str| {
        values[&(s.to_string(), format_ir(ir), f, st.to_string(), m.to_string())]
    };

    let mut by_scenario = Vec::new();
    for s in &scenarios {
        for &ir in &irs {
            for metric in METRICS {
                let means: Vec<f64> = strategies
                    .iter()
                    .map(|st| folds.iter().map(|&f| value(s, ir, f, st, metric)).sum::<f64>() / folds.len() as f64)
                    .collect();
                let top = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (st, &mean) in strategies.iter().zip(&means) {
                    by_scenario.push(ScenarioRow {
                        scenario: s.clone(),
                        ir,
                        metric: metric.to_string(),
                        strategy: st.clone(),
                        mean,
                        best: mean == top,
                    });
                }
            }
        }
    }

    let mut overall = Vec::new();
    for metric in METRICS {
        let mut cells = Vec::new();
        for s in &scenarios {
            for &ir in &irs {
                for &f in &folds {
                    cells.push(
                        strategies
                            .iter()
                            .map(|st| value(s, ir, f, st, metric))
                            .collect::<Vec<f64>>(),
                    );
                }
            }
        }
        let ranks = average_ranks(&cells, true)?;
        for (j, st) in strategies.iter().enumerate() {
            overall.push(OverallRow {
                strategy: st.clone(),
                metric: metric.to_string(),
                mean: cells.iter().map(|c| c[j]).sum::<f64>() / cells.len() as f64,
                avg_rank: ranks[j],
            });
        }
    }
    Ok(Summary {
        strategies,
        by_scenario,
        overall,
    })
}

pub fn summarize(results: impl AsRef<Path>) -> Result<Summary> {
    summarize_rows(&read_results(results)?)
}

impl Summary {
    pub fn by_scenario_csv(&self) -> String {
        let mut out = format!("{BY_SCENARIO_HEADER}\n");
        for r in &self.by_scenario {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.scenario,
                format_ir(r.ir),
                r.metric,
                r.strategy,
                r.mean,
                u8::from(r.best)
            );
        }
        out
    }

    pub fn overall_csv(&self) -> String {
        let mut out = format!("{OVERALL_HEADER}\n");
        for r in &self.overall {
            let _ = writeln!(out, "{},{},{},{}", r.strategy, r.metric, r.mean, r.avg_rank);
        }
        out
    }

    /// Strategy x metric table of `mean (average rank)`, best mean starred.
    pub fn render_overall(&self) -> String {
        let width = self.strategies.iter().map(String::len).max().unwrap_or(8).max(8);
        let mut out = format!("{:width$}", "strategy");
        for m in METRICS {
            let _ = write!(out, "  {m:>16}");
        }
        out.push('\n');
        let lookup: BTreeMap<(&str, &str), &OverallRow> = self
            .overall
            .iter()
            .map(|r| ((r.strategy.as_str(), r.metric.as_str()), r))
            .collect();
        let best: HashMap<&str, f64> = METRICS
            .iter()
            .map(|&m| {
                let top = self
                    .overall
                    .iter()
                    .filter(|r| r.metric == m)
                    .map(|r| r.mean)
                    .fold(f64::NEG_INFINITY, f64::max);
                (m, top)
            })
            .collect();
        for st in &self.strategies {
            let _ = write!(out, "{st:width$}");
            for m in METRICS {
                let r = lookup[&(st.as_str(), m)];
                let star = if r.mean == best[m] { '*' } else { ' ' };
                let _ = write!(out, "  {:.4}{star} ({:>5.2})", r.mean, r.avg_rank);
            }
            out.push('\n');
        }
        out
    }

    /// Writes `summary_by_scenario.csv` and `summary_overall.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let a = dir.join("summary_by_scenario.csv");
        let b = dir.join("summary_overall.csv");
        fs::write(&a, self.by_scenario_csv()).map_err(|e| Error::io(&a, e))?;
        fs::write(&b, self.overall_csv()).map_err(|e| Error::io(&b, e))?;
        Ok((a, b))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub scenario: String,
    pub metric: String,
    pub ir: f64,
    pub mean: f64,
    /// Sample standard deviation over folds (0 for a single fold).
    pub std: f64,
}

/// Mean and spread across folds per (scenario, metric, IR); failed cells are skipped.
pub fn ir_curve(rows: &[ResultRow]) -> Vec<CurvePoint> {
    let mut scenarios: Vec<String> = Vec::new();
    let mut groups: HashMap<(String, &str, String), (f64, Vec<f64>)> = HashMap::new();
    for r in rows {
        let Some(&metric) = METRICS.iter().find(|m| **m == r.metric) else {
            continue;
        };
        push_unique(&mut scenarios, &r.scenario);
        groups
            .entry((r.scenario.clone(), metric, format_ir(r.ir)))
            .or_insert_with(|| (r.ir, Vec::new()))
            .1
            .push(r.value);
    }
    let mut out = Vec::new();
    for s in &scenarios {
        for metric in METRICS {
            let mut pts: Vec<(f64, &Vec<f64>)> = groups
                .iter()
                .filter(|((gs, gm, _), _)| gs == s && *gm == metric)
                .map(|(_, (ir, v))| (*ir, v))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (ir, v) in pts {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let std = if v.len() > 1 {
                    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                out.push(CurvePoint {
                    scenario: s.clone(),
                    metric: metric.to_string(),
                    ir,
                    mean,
                    std,
                });
            }
        }
    }
    out
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.scenario,
            p.metric,
            format_ir(p.ir),
            p.mean,
            p.std
        );
    }
    out
}
