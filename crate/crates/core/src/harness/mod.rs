//! Experiment harness: synthetic data, the evaluation grid, summaries.

mod config;
mod describe;
mod grid;
mod summary;
mod synthetic;

pub use config::{Architecture, DatasetSource, Execution, ExperimentConfig};
pub use describe::{dataset_shape, describe_config, describe_imbalance, distribution_csv, DistributionRow};
pub use grid::{
    baseline_ir_study, enumerate_cells, format_ir, prepare_folds, read_results, run_cell, run_grid, run_grid_to, Cell,
    CellFailure, FoldData, GridReport, ResultRow, ERROR_METRIC, METRICS, RESULTS_HEADER,
};
pub use summary::{
    curve_csv, ir_curve, summarize, summarize_rows, CurvePoint, OverallRow, ScenarioRow, Summary, BY_SCENARIO_HEADER,
    CURVE_HEADER, OVERALL_HEADER,
};
pub use synthetic::{generate_synthetic, SyntheticSpec};
