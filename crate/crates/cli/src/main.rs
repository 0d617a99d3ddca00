use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use twostage::harness::{
    baseline_ir_study, describe_config, describe_imbalance, distribution_csv, run_grid, summarize, DatasetSource,
    Execution, ExperimentConfig, GridReport, SyntheticSpec,
};
use twostage::imbalance::{RatioMode, Scenario};
use twostage::model::{Network, TrainConfig};
use twostage::pipeline::{evaluate, run_strategy, StrategySpec};
use twostage::resampling::ResamplerKind;
use twostage::{Dataset, SeededRng};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "twostage",
    version,
    about = "Two-stage resampling for imbalanced classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a Gaussian-blob dataset as CSV.
    Generate(GenerateArgs),
    /// Per-class counts and totals for every scenario and IR level.
    DescribeImbalance(DescribeArgs),
    /// Rebalance a CSV dataset.
    Resample(ResampleArgs),
    /// Train one strategy, save the network and report test metrics.
    Train(TrainArgs),
    /// Run the full folds x scenarios x IR levels x strategies grid.
    Run(RunArgs),
    /// Baseline-only grid including IR = 1 plus the per-IR curve.
    IrStudy(RunArgs),
    /// Per-scenario tables and overall average ranks of a results file.
    Summarize(SummarizeArgs),
}

/// Every experiment setting; flags override values from `--config`.
#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use a CSV dataset instead of synthetic blobs.
    #[arg(long, value_name = "PATH")]
    dataset: Option<PathBuf>,
    #[arg(long)]
    synthetic_classes: Option<usize>,
    #[arg(long)]
    synthetic_samples: Option<usize>,
    #[arg(long)]
    synthetic_dims: Option<usize>,
    #[arg(long)]
    synthetic_spread: Option<f64>,
    #[arg(long)]
    synthetic_separation: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated, e.g. `linear,single-majority`.
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<Scenario>>,
    #[arg(long, value_delimiter = ',')]
    ir_levels: Option<Vec<f64>>,
    /// Comma-separated, e.g. `baseline,is:smote,ts:smote+rus`.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<StrategySpec>>,
    #[arg(long, value_delimiter = ',')]
    body_dims: Option<Vec<usize>>,
    #[arg(long)]
    head_hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    ft_epochs: Option<usize>,
    #[arg(long)]
    ft_batch_size: Option<usize>,
    #[arg(long)]
    ft_learning_rate: Option<f64>,
    #[arg(long)]
    ft_rho: Option<f64>,
    #[arg(long)]
    ft_epsilon: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ratio_mode: Option<RatioMode>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Run cells one after another (byte-reproducible output order).
    #[arg(long, conflicts_with = "workers")]
    serial: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Abort on the first failing cell.
    #[arg(long)]
    strict: bool,
}

fn override_train(
    cfg: &mut TrainConfig,
    epochs: Option<usize>,
    batch: Option<usize>,
    lr: Option<f64>,
    rho: Option<f64>,
    eps: Option<f64>,
) {
    if let Some(v) = epochs {
        cfg.epochs = v;
    }
    if let Some(v) = batch {
        cfg.batch_size = v;
    }
    if let Some(v) = lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = rho {
        cfg.rho = v;
    }
    if let Some(v) = eps {
        cfg.epsilon = v;
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            // An unreadable config file is a configuration problem, not a data one.
            Some(path) => ExperimentConfig::from_json_file(path).map_err(|e| match e {
                twostage::Error::Io { .. } => twostage::Error::Config(e.to_string()),
                other => other,
            })?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.dataset {
            cfg.dataset = DatasetSource::Csv(path.clone());
        }
        let synthetic_flags = [
            self.synthetic_classes.is_some(),
            self.synthetic_samples.is_some(),
            self.synthetic_dims.is_some(),
            self.synthetic_spread.is_some(),
            self.synthetic_separation.is_some(),
        ];
        if synthetic_flags.iter().any(|&f| f) {
            let DatasetSource::Synthetic(spec) = &mut cfg.dataset else {
                return Err(twostage::Error::Config("synthetic-data flags given for a CSV dataset".into()).into());
            };
            apply_synthetic(spec, self);
        }
        if let Some(v) = self.folds {
            cfg.num_folds = v;
        }
        if let Some(v) = &self.scenarios {
            cfg.scenarios = v.clone();
        }
        if let Some(v) = &self.ir_levels {
            cfg.ir_levels = v.clone();
        }
        if let Some(v) = &self.strategies {
            cfg.strategies = v.clone();
        }
        if let Some(v) = &self.body_dims {
            cfg.net.body_dims = v.clone();
        }
        if let Some(v) = self.head_hidden {
            cfg.net.head_hidden = v;
        }
        override_train(
            &mut cfg.train,
            self.epochs,
            self.batch_size,
            self.learning_rate,
            self.rho,
            self.epsilon,
        );
        override_train(
            &mut cfg.fine_tune,
            self.ft_epochs,
            self.ft_batch_size,
            self.ft_learning_rate,
            self.ft_rho,
            self.ft_epsilon,
        );
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        if let Some(v) = self.ratio_mode {
            cfg.ratio_mode = v;
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if self.serial {
            cfg.execution = Execution::Serial;
        }
        if let Some(workers) = self.workers {
            cfg.execution = Execution::Parallel { workers };
        }
        cfg.strict |= self.strict;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn apply_synthetic(spec: &mut SyntheticSpec, a: &ConfigArgs) {
    if let Some(v) = a.synthetic_classes {
        spec.num_classes = v;
    }
    if let Some(v) = a.synthetic_samples {
        spec.samples_per_class = v;
    }
    if let Some(v) = a.synthetic_dims {
        spec.dims = v;
    }
    if let Some(v) = a.synthetic_spread {
        spec.cluster_spread = v;
    }
    if let Some(v) = a.synthetic_separation {
        spec.class_separation = v;
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 8)]
    classes: usize,
    #[arg(long, default_value_t = 200)]
    samples_per_class: usize,
    #[arg(long, default_value_t = 16)]
    dims: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct DescribeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Rows per class before induction (default: from the dataset).
    #[arg(long)]
    n: Option<usize>,
    /// Number of classes (default: from the dataset).
    #[arg(long)]
    classes: Option<usize>,
    /// Write CSV here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Rus,
    Ros,
    Smote,
}

#[derive(Args)]
struct ResampleArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// SMOTE neighbourhood size.
    #[arg(long, default_value_t = twostage::resampling::DEFAULT_SMOTE_K)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Training CSV (required unless `--load` is given).
    #[arg(long, required_unless_present = "load")]
    train: Option<PathBuf>,
    /// Test CSV to report metrics on.
    #[arg(long, required_unless_present = "train")]
    test: Option<PathBuf>,
    #[arg(long, default_value = "ts:smote+rus")]
    strategy: StrategySpec,
    /// Where to save the trained network.
    #[arg(long, default_value = "network.bin", conflicts_with = "load")]
    save: PathBuf,
    /// Evaluate a saved network instead of training.
    #[arg(long)]
    load: Option<PathBuf>,
    /// Also write the metrics JSON here.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Results CSV written by `run`.
    #[arg(long, short)]
    results: PathBuf,
    /// Directory for the summary CSVs (default: next to the results).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn generate(a: GenerateArgs) -> Result<()> {
    let spec = SyntheticSpec {
        num_classes: a.classes,
        samples_per_class: a.samples_per_class,
        dims: a.dims,
        cluster_spread: a.spread,
        class_separation: a.separation,
    };
    let ds = DatasetSource::Synthetic(spec).load(a.seed)?;
    ds.save_csv(&a.out)?;
    log::info!("wrote {} rows to {}", ds.len(), a.out.display());
    Ok(())
}

fn describe(a: DescribeArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let rows = match (a.n, a.classes) {
        (Some(n), Some(m)) => describe_imbalance(&cfg.scenarios, &cfg.ir_levels, n, m, cfg.ratio_mode)?,
        (None, None) => describe_config(&cfg)?,
        _ => {
            let (n0, m0) = twostage::harness::dataset_shape(&cfg)?;
            describe_imbalance(
                &cfg.scenarios,
                &cfg.ir_levels,
                a.n.unwrap_or(n0),
                a.classes.unwrap_or(m0),
                cfg.ratio_mode,
            )?
        }
    };
    write_or_print(a.out.as_deref(), &distribution_csv(&rows))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn resample(a: ResampleArgs) -> Result<()> {
    let ds = Dataset::load_csv(&a.input)?;
    let kind = match a.method {
        Method::Rus => ResamplerKind::Rus,
        Method::Ros => ResamplerKind::Ros,
        Method::Smote => ResamplerKind::Smote { k: a.k },
    };
    let out = kind.resample(&ds, &mut SeededRng::new(a.seed))?;
    out.save_csv(&a.output)?;
    log::info!("{kind}: {} -> {} rows", ds.len(), out.len());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let network = match &a.load {
        Some(path) => Network::load(path)?,
        None => {
            let path = a.train.as_ref().expect("clap enforces --train");
            let ds = Dataset::load_csv(path)?;
            let net_cfg = cfg.net.net_config(ds.dim(), ds.num_classes());
            let out = run_strategy(&ds, &a.strategy, &net_cfg, &cfg.train, &cfg.fine_tune, cfg.master_seed)?;
            out.network.save(&a.save)?;
            log::info!(
                "{}: stage 1 on {} rows, stage 2 on {} rows; saved to {}",
                a.strategy,
                out.stage1_rows,
                out.stage2_rows,
                a.save.display()
            );
            out.network
        }
    };
    let Some(test) = &a.test else {
        return Ok(());
    };
    let test = Dataset::load_csv(test)?;
    let eval = evaluate(&network, &test)?;
    let report = json!({
        "strategy": a.strategy.to_string(),
        "acc": eval.acc,
        "avacc": eval.avacc,
        "cba": eval.cba,
        "mavg": eval.mavg,
        "confusion": eval.confusion.to_rows(),
    });
    let text = serde_json::to_string_pretty(&report)? + "\n";
    print!("{text}");
    if let Some(path) = &a.metrics_out {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn print_report(report: &GridReport) {
    println!(
        "{}: {} cells ({} resumed, {} run, {} failed)",
        report.results_path.display(),
        report.total_cells,
        report.skipped_cells,
        report.run_cells,
        report.failures.len()
    );
    for f in &report.failures {
        eprintln!("failed cell {}: {}", f.cell, f.message);
    }
}

fn run(a: RunArgs) -> Result<bool> {
    let cfg = a.config.resolve()?;
    let report = run_grid(&cfg)?;
    print_report(&report);
    Ok(report.is_partial())
}

fn ir_study(a: RunArgs) -> Result<bool> {
    let cfg = a.config.resolve()?;
    let (report, curve) = baseline_ir_study(&cfg)?;
    print_report(&report);
    println!("curve: {}", curve.display());
    Ok(report.is_partial())
}

fn summarize_cmd(a: SummarizeArgs) -> Result<()> {
    let summary = summarize(&a.results)?;
    let dir = a
        .out_dir
        .or_else(|| a.results.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    let (by_scenario, overall) = summary.write(&dir)?;
    print!("{}", summary.render_overall());
    log::info!("wrote {} and {}", by_scenario.display(), overall.display());
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<twostage::Error>() {
        Some(err) if err.is_config() => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a).map(|_| false),
        Command::DescribeImbalance(a) => describe(a).map(|_| false),
        Command::Resample(a) => resample(a).map(|_| false),
        Command::Train(a) => train(a).map(|_| false),
        Command::Run(a) => run(a),
        Command::IrStudy(a) => ir_study(a),
        Command::Summarize(a) => summarize_cmd(a).map(|_| false),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_PARTIAL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
