//! The folds x scenarios x IR levels x strategies experiment grid.
//!
//! For every fold the training split is imbalanced once per scenario (nested
//! across IR levels, one class ordering per fold) and every strategy is
//! evaluated on the untouched, balanced test fold. Results are appended to a
//! CSV one cell at a time; re-running over an existing file skips cells that
//! are already complete.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use super::config::{Execution, ExperimentConfig};
use super::summary::{curve_csv, ir_curve};
use crate::dataset::{stratified_kfold, Dataset};
use crate::error::{Error, Result};
use crate::imbalance::{induce, random_class_order, ImbalancePlan, Scenario};
use crate::model::NetConfig;
use crate::pipeline::{evaluate, run_strategy, Evaluation, StrategySpec};
use crate::rng::{substream_seed, SeededRng};

pub const RESULTS_HEADER: &str = "scenario,ir,fold,strategy,metric,value";
pub const METRICS: [&str; 4] = ["acc", "avacc", "cba", "mavg"];
/// Metric name of the marker row written for a failed cell.
pub const ERROR_METRIC: &str = "error";

/// Shortest decimal that round-trips, e.g. `2`, `2.5`.
pub fn format_ir(ir: f64) -> String {
    format!("{ir}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub ir: f64,
    pub fold: usize,
    pub strategy: String,
    pub metric: String,
    pub value: f64,
}

impl ResultRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.scenario,
            format_ir(self.ir),
            self.fold,
            self.strategy,
            self.metric,
            self.value
        )
    }

    pub fn parse_line(line: &str) -> Option<ResultRow> {
        let f: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
        if f.len() != 6 {
            return None;
        }
        Some(ResultRow {
            scenario: f[0].to_string(),
            ir: f[1].parse().ok()?,
            fold: f[2].parse().ok()?,
            strategy: f[3].to_string(),
            metric: f[4].to_string(),
            value: f[5].parse().ok()?,
        })
    }

    /// `(scenario, ir, fold, strategy)` identity of the cell this row belongs to.
    pub fn cell_key(&self) -> String {
        cell_key(&self.scenario, self.ir, self.fold, &self.strategy)
    }
}

fn cell_key(scenario: &str, ir: f64, fold: usize, strategy: &str) -> String {
    format!("{scenario},{},{fold},{strategy}", format_ir(ir))
}

/// Parses a results file; error marker rows are included.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(RESULTS_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{RESULTS_HEADER}`"),
        });
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            ResultRow::parse_line(line).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: format!("malformed result row `{line}`"),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub fold: usize,
    pub scenario: Scenario,
    /// Index into the configured IR levels.
    pub level: usize,
    pub ir: f64,
    pub strategy: StrategySpec,
}

impl Cell {
    pub fn key(&self) -> String {
        cell_key(self.scenario.name(), self.ir, self.fold, &self.strategy.to_string())
    }

    pub fn seed(&self, master_seed: u64) -> u64 {
        substream_seed(
            master_seed,
            &format!(
                "cell/fold={}/scenario={}/ir={}/strategy={}",
                self.fold,
                self.scenario,
                format_ir(self.ir),
                self.strategy
            ),
        )
    }
}

/// Cells in canonical order: fold, scenario, level, strategy.
pub fn enumerate_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for fold in 0..cfg.num_folds {
        for &scenario in &cfg.scenarios {
            for (level, &ir) in cfg.ir_levels.iter().enumerate() {
                for &strategy in &cfg.strategies {
                    cells.push(Cell {
                        fold,
                        scenario,
                        level,
                        ir,
                        strategy,
                    });
                }
            }
        }
    }
    cells
}

/// Training sets (per scenario, per level) and the balanced test set of one fold.
#[derive(Clone, Debug)]
pub struct FoldData {
    pub train: HashMap<Scenario, Vec<Dataset>>,
    pub test: Dataset,
    pub class_order: Vec<usize>,
}

pub fn prepare_folds(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Vec<FoldData>> {
    let root = SeededRng::new(cfg.master_seed);
    let folds = stratified_kfold(ds, cfg.num_folds, &mut root.substream("folds"))?;
    (0..cfg.num_folds)
        .map(|f| {
            let (train, test) = folds.split(ds, f)?;
            let class_order = random_class_order(ds.num_classes(), &mut root.substream(&format!("fold{f}.order")));
            let n_per_class = train.class_counts().into_iter().min().unwrap_or(0);
            let mut per_scenario = HashMap::new();
            for &scenario in &cfg.scenarios {
                let plan = ImbalancePlan {
                    scenario,
                    class_order: class_order.clone(),
                    levels: cfg.ir_levels.clone(),
                    n_per_class,
                    ratio_mode: cfg.ratio_mode,
                };
                // Same induction stream for every scenario of a fold.
                let levels = induce(&train, &plan, &mut root.substream(&format!("fold{f}.induce")))?;
                per_scenario.insert(scenario, levels);
            }
            Ok(FoldData {
                train: per_scenario,
                test,
                class_order,
            })
        })
        .collect()
}

pub fn run_cell(cfg: &ExperimentConfig, net_cfg: &NetConfig, fold: &FoldData, cell: &Cell) -> Result<Evaluation> {
    let train = &fold.train[&cell.scenario][cell.level];
    let outcome = run_strategy(
        train,
        &cell.strategy,
        net_cfg,
        &cfg.train,
        &cfg.fine_tune,
        cell.seed(cfg.master_seed),
    )?;
    evaluate(&outcome.network, &fold.test)
}

fn cell_lines(cell: &Cell, outcome: &Result<Evaluation>) -> String {
    let row = |metric: &str, value: f64| ResultRow {
        scenario: cell.scenario.to_string(),
        ir: cell.ir,
        fold: cell.fold,
        strategy: cell.strategy.to_string(),
        metric: metric.to_string(),
        value,
    };
    let mut out = String::new();
    match outcome {
        Ok(eval) => {
            for (metric, value) in eval.named() {
                out.push_str(&row(metric, value).to_line());
                out.push('\n');
            }
        }
        Err(_) => {
            out.push_str(&row(ERROR_METRIC, f64::NAN).to_line());
            out.push('\n');
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub cell: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridReport {
    pub results_path: PathBuf,
    pub total_cells: usize,
    /// Cells already present in the results file.
    pub skipped_cells: usize,
    pub run_cells: usize,
    pub failures: Vec<CellFailure>,
}

impl GridReport {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Complete lines of an existing results file, restricted to finished cells.
fn recover_existing(path: &Path) -> Result<(String, HashSet<String>)> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((String::new(), HashSet::new())),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut lines = text.split_inclusive('\n').filter(|l| l.ends_with('\n'));
    match lines.next() {
        None => return Ok((String::new(), HashSet::new())),
        Some(h) if h.trim_end() == RESULTS_HEADER => {}
        Some(_) => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("existing results file does not start with `{RESULTS_HEADER}`"),
            })
        }
    }
    let rows: Vec<(&str, ResultRow)> = lines.filter_map(|l| ResultRow::parse_line(l).map(|r| (l, r))).collect();
    let mut metrics_seen: HashMap<String, HashSet<&str>> = HashMap::new();
    for (_, r) in &rows {
        metrics_seen.entry(r.cell_key()).or_default().insert(r.metric.as_str());
    }
    let complete: HashSet<String> = metrics_seen
        .into_iter()
        .filter(|(_, m)| m.contains(ERROR_METRIC) || METRICS.iter().all(|x| m.contains(x)))
        .map(|(k, _)| k)
        .collect();
    let kept: String = rows
        .iter()
        .filter(|(_, r)| complete.contains(&r.cell_key()))
        .map(|(l, _)| *l)
        .collect();
    Ok((kept, complete))
}

pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridReport> {
    run_grid_to(cfg, &cfg.results_path())
}

/// Runs every cell not yet in `path` and appends its rows.
pub fn run_grid_to(cfg: &ExperimentConfig, path: &Path) -> Result<GridReport> {
    cfg.validate()?;
    let ds = cfg.dataset.load(cfg.master_seed)?;
    if ds.num_classes() < 2 {
        return Err(Error::InvalidDataset("need at least two classes".into()));
    }
    let net_cfg = cfg.net.net_config(ds.dim(), ds.num_classes());
    net_cfg.validate()?;
    let folds = prepare_folds(cfg, &ds)?;

    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let (kept, complete) = recover_existing(path)?;
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "{RESULTS_HEADER}")
        .and_then(|_| file.write_all(kept.as_bytes()))
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(path, e))?;
    drop(file);

    let cells = enumerate_cells(cfg);
    let pending: Vec<&Cell> = cells.iter().filter(|c| !complete.contains(&c.key())).collect();
    log::info!(
        "grid: {} cells, {} already complete, {} to run",
        cells.len(),
        cells.len() - pending.len(),
        pending.len()
    );

    let append = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let writer = Mutex::new(BufWriter::new(append));
    let failures = Mutex::new(Vec::new());

    let process = |cell: &&Cell| -> Result<()> {
        let outcome = run_cell(cfg, &net_cfg, &folds[cell.fold], cell);
        if let Err(e) = &outcome {
            log::warn!("cell {} failed: {e}", cell.key());
            if cfg.strict {
                return Err(Error::Sampling(format!("cell {} failed: {e}", cell.key())));
            }
            failures.lock().unwrap().push(CellFailure {
                cell: cell.key(),
                message: e.to_string(),
            });
        }
        let lines = cell_lines(cell, &outcome);
        let mut w = writer.lock().unwrap();
        w.write_all(lines.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    };

    match cfg.execution {
        Execution::Serial => pending.iter().try_for_each(process)?,
        Execution::Parallel { workers } => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
            pool.install(|| pending.par_iter().try_for_each(process))?;
        }
    }

    let mut failures = failures.into_inner().unwrap();
    let order: HashMap<String, usize> = cells.iter().enumerate().map(|(i, c)| (c.key(), i)).collect();
    failures.sort_by_key(|f| order.get(&f.cell).copied());
    Ok(GridReport {
        results_path: path.to_path_buf(),
        total_cells: cells.len(),
        skipped_cells: cells.len() - pending.len(),
        run_cells: pending.len(),
        failures,
    })
}

/// Baseline-only grid over the configured levels plus IR = 1, followed by the
/// per-(scenario, metric) curve of fold means.
///
/// Writes `ir_study_results.csv` and `ir_study_curve.csv` into the output directory.
pub fn baseline_ir_study(cfg: &ExperimentConfig) -> Result<(GridReport, PathBuf)> {
    let mut study = cfg.clone();
    study.strategies = vec![StrategySpec::baseline()];
    if study.ir_levels.first() != Some(&1.0) {
        study.ir_levels.insert(0, 1.0);
    }
    let results = study.output_dir.join("ir_study_results.csv");
    let report = run_grid_to(&study, &results)?;
    let curve_path = study.output_dir.join("ir_study_curve.csv");
    let curve = ir_curve(&read_results(&results)?);
    fs::write(&curve_path, curve_csv(&curve)).map_err(|e| Error::io(&curve_path, e))?;
    Ok((report, curve_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_round_trip() {
        let r = ResultRow {
            scenario: "linear".into(),
            ir: 2.5,
            fold: 3,
            strategy: "ts:smote+rus".into(),
            metric: "mavg".into(),
            value: 0.123456789,
        };
        assert_eq!(r.to_line(), "linear,2.5,3,ts:smote+rus,mavg,0.123456789");
        assert_eq!(ResultRow::parse_line(&r.to_line()).unwrap(), r);
        assert!(ResultRow::parse_line("a,b,c").is_none());
        assert_eq!(format_ir(10.0), "10");
    }

    #[test]
    fn full_default_grid_size() {
        let cfg = ExperimentConfig::default();
        let cells = enumerate_cells(&cfg);
        assert_eq!(cells.len(), 1080);
        assert_eq!(cells.len() * METRICS.len(), 4320);
        let keys: HashSet<String> = cells.iter().map(Cell::key).collect();
        assert_eq!(keys.len(), cells.len());
    }

    #[test]
    fn cell_seeds_differ() {
        let cfg = ExperimentConfig::default();
        let cells = enumerate_cells(&cfg);
        let seeds: HashSet<u64> = cells.iter().map(|c| c.seed(7)).collect();
        assert_eq!(seeds.len(), cells.len());
    }

    #[test]
    fn partial_cells_are_dropped_on_recovery() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let text = format!(
            "{RESULTS_HEADER}\n\
             linear,2,0,baseline,acc,0.5\nlinear,2,0,baseline,avacc,0.5\n\
             linear,2,0,baseline,cba,0.5\nlinear,2,0,baseline,mavg,0.5\n\
             linear,2,1,baseline,acc,0.5\nlinear,2,1,baseline,avacc,0.5\n\
             linear,5,0,baseline,error,NaN\nlinear,5,1,baseline,acc,0.2"
        );
        fs::write(&path, text).unwrap();
        let (kept, complete) = recover_existing(&path).unwrap();
        assert_eq!(complete.len(), 2);
        assert!(complete.contains("linear,2,0,baseline"));
        assert!(complete.contains("linear,5,0,baseline"));
        assert_eq!(kept.lines().count(), 5);
    }
}
