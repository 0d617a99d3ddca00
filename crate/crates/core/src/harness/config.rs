use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synthetic::{generate_synthetic, SyntheticSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::imbalance::{RatioMode, Scenario};
use crate::model::{NetConfig, TrainConfig};
use crate::pipeline::StrategySpec;
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    Csv(PathBuf),
    Synthetic(SyntheticSpec),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSpec::default())
    }
}

impl DatasetSource {
    /// Loads the CSV or generates blobs from the `data` substream of `master_seed`.
    pub fn load(&self, master_seed: u64) -> Result<Dataset> {
        match self {
            DatasetSource::Csv(path) => Dataset::load_csv(path),
            DatasetSource::Synthetic(spec) => {
                generate_synthetic(spec, &mut SeededRng::new(master_seed).substream("data"))
            }
        }
    }
}

/// Layer widths; input and output sizes come from the data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub body_dims: Vec<usize>,
    pub head_hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            body_dims: vec![64, 32],
            head_hidden: 32,
        }
    }
}

impl Architecture {
    pub fn net_config(&self, input_dim: usize, num_classes: usize) -> NetConfig {
        NetConfig {
            input_dim,
            body_dims: self.body_dims.clone(),
            head_hidden: self.head_hidden,
            num_classes,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    #[default]
    Serial,
    Parallel {
        workers: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub num_folds: usize,
    pub scenarios: Vec<Scenario>,
    pub ir_levels: Vec<f64>,
    pub strategies: Vec<StrategySpec>,
    pub net: Architecture,
    /// Full-network training.
    pub train: TrainConfig,
    /// Head fine-tuning.
    pub fine_tune: TrainConfig,
    pub master_seed: u64,
    pub ratio_mode: RatioMode,
    pub output_dir: PathBuf,
    pub execution: Execution,
    /// Abort the grid on the first failing cell.
    pub strict: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            num_folds: 10,
            scenarios: Scenario::ALL.to_vec(),
            ir_levels: vec![2.0, 5.0, 10.0],
            strategies: StrategySpec::standard_set(),
            net: Architecture::default(),
            train: TrainConfig::default(),
            fine_tune: TrainConfig::default(),
            master_seed: 0,
            ratio_mode: RatioMode::default(),
            output_dir: PathBuf::from("results"),
            execution: Execution::default(),
            strict: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.num_folds)));
        }
        if self.scenarios.is_empty() || self.ir_levels.is_empty() || self.strategies.is_empty() {
            return Err(Error::Config(
                "scenarios, IR levels and strategies must be non-empty".into(),
            ));
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            if self.scenarios[..i].contains(s) {
                return Err(Error::Config(format!("scenario {s} listed twice")));
            }
        }
        for (i, s) in self.strategies.iter().enumerate() {
            s.validate()?;
            if self.strategies[..i].contains(s) {
                return Err(Error::Config(format!("strategy {s} listed twice")));
            }
        }
        if !(self.ir_levels[0] >= 1.0) || self.ir_levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "IR levels must be finite and >= 1: {:?}",
                self.ir_levels
            )));
        }
        if self.ir_levels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(format!(
                "IR levels must be strictly ascending: {:?}",
                self.ir_levels
            )));
        }
        if let Execution::Parallel { workers: 0 } = self.execution {
            return Err(Error::Config("parallel execution needs at least one worker".into()));
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        self.train.validate()?;
        self.fine_tune.validate()?;
        Ok(())
    }

    pub fn results_path(&self) -> PathBuf {
        self.output_dir.join("results.csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_study_protocol() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.num_folds, 10);
        assert_eq!(cfg.ir_levels, vec![2.0, 5.0, 10.0]);
        assert_eq!(cfg.scenarios.len(), 4);
        assert_eq!(cfg.strategies.len(), 9);
        cfg.validate().unwrap();
    }

    #[test]
    fn json_round_trip_and_partial_configs() {
        let cfg = ExperimentConfig::default();
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let partial: ExperimentConfig = serde_json::from_str(
            r#"{"num_folds": 3, "strategies": ["baseline", "ts:smote+rus"],
                "scenarios": ["single-majority"], "execution": {"parallel": {"workers": 2}},
                "dataset": {"csv": "data.csv"}, "train": {"epochs": 5}}"#,
        )
        .unwrap();
        assert_eq!(partial.num_folds, 3);
        assert_eq!(partial.strategies[1], StrategySpec::default_two_stage());
        assert_eq!(partial.execution, Execution::Parallel { workers: 2 });
        assert_eq!(partial.train.epochs, 5);
        assert_eq!(partial.train.batch_size, 32);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"strategies": ["ts:none+none"]}"#).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig {
            ir_levels: vec![5.0, 2.0],
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.ir_levels = vec![0.5];
        assert!(cfg.validate().is_err());
        cfg.ir_levels = vec![1.0, 2.0];
        cfg.num_folds = 1;
        assert!(cfg.validate().is_err());
        cfg.num_folds = 2;
        cfg.scenarios = vec![Scenario::Linear, Scenario::Linear];
        assert!(cfg.validate().is_err());
    }
}
