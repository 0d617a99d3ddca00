//! Resampling strategies wrapped around network training.
//!
//! | strategy  | stage 1                          | stage 2                                    |
//! |-----------|----------------------------------|--------------------------------------------|
//! | baseline  | train on the data as-is          | -                                          |
//! | `is:X`    | resample inputs with X, train    | -                                          |
//! | `fs:X`    | train on the data as-is          | extract features, resample with X, fine-tune head |
//! | `ts:X+Y`  | resample inputs with X, train    | extract features of the *original* data, resample with Y, fine-tune head |
//!
//! Each run draws from disjoint substreams of its seed: `init`, `s1.resample`,
//! `s1.train`, `s2.resample` and `s2.train`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{self, ConfusionMatrix};
use crate::model::{NetConfig, Network, TrainConfig, TrainReport, TrainScope};
use crate::resampling::ResamplerKind;
use crate::rng::{substream_seed, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Baseline,
    InputSpace,
    FeatureSpace,
    TwoStage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StrategySpec {
    pub kind: StrategyKind,
    /// Input-space resampler (input-space and two-stage only).
    pub first: Option<ResamplerKind>,
    /// Feature-space resampler (feature-space and two-stage only).
    pub second: Option<ResamplerKind>,
}

impl StrategySpec {
    pub fn baseline() -> Self {
        Self {
            kind: StrategyKind::Baseline,
            first: None,
            second: None,
        }
    }

    pub fn input_space(r: ResamplerKind) -> Self {
        Self {
            kind: StrategyKind::InputSpace,
            first: Some(r),
            second: None,
        }
    }

    pub fn feature_space(r: ResamplerKind) -> Self {
        Self {
            kind: StrategyKind::FeatureSpace,
            first: None,
            second: Some(r),
        }
    }

    pub fn two_stage(first: ResamplerKind, second: ResamplerKind) -> Self {
        Self {
            kind: StrategyKind::TwoStage,
            first: Some(first),
            second: Some(second),
        }
    }

    /// SMOTE (k = 5) on inputs, then RUS on features.
    pub fn default_two_stage() -> Self {
        Self::two_stage(ResamplerKind::smote(), ResamplerKind::Rus)
    }

    /// Baseline, the three input-space and feature-space variants, and two two-stage pairings.
    pub fn standard_set() -> Vec<StrategySpec> {
        use ResamplerKind::*;
        let smote = ResamplerKind::smote();
        vec![
            Self::baseline(),
            Self::input_space(Rus),
            Self::input_space(Ros),
            Self::input_space(smote),
            Self::feature_space(Rus),
            Self::feature_space(Ros),
            Self::feature_space(smote),
            Self::two_stage(smote, smote),
            Self::two_stage(smote, Rus),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            StrategyKind::Baseline => self.first.is_none() && self.second.is_none(),
            StrategyKind::InputSpace => self.first.is_some() && self.second.is_none(),
            StrategyKind::FeatureSpace => self.first.is_none() && self.second.is_some(),
            StrategyKind::TwoStage => match (self.first, self.second) {
                (Some(ResamplerKind::NoResampling), Some(ResamplerKind::NoResampling)) => false,
                (Some(_), Some(_)) => true,
                _ => false,
            },
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent strategy {self:?}")))
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |r: Option<ResamplerKind>| r.map_or_else(|| "?".to_string(), |r| r.to_string());
        match self.kind {
            StrategyKind::Baseline => f.write_str("baseline"),
            StrategyKind::InputSpace => write!(f, "is:{}", name(self.first)),
            StrategyKind::FeatureSpace => write!(f, "fs:{}", name(self.second)),
            StrategyKind::TwoStage => write!(f, "ts:{}+{}", name(self.first), name(self.second)),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    /// `baseline`, `is:<r>`, `fs:<r>` or `ts:<r1>+<r2>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let spec = match s.split_once(':') {
            None if s == "baseline" => Self::baseline(),
            Some(("is", r)) => Self::input_space(r.parse()?),
            Some(("fs", r)) => Self::feature_space(r.parse()?),
            Some(("ts", pair)) => {
                let (a, b) = pair
                    .split_once('+')
                    .ok_or_else(|| Error::Config(format!("two-stage strategy `{s}` needs `<first>+<second>`")))?;
                Self::two_stage(a.parse()?, b.parse()?)
            }
            _ => return Err(Error::Config(format!("unknown strategy `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for StrategySpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StrategySpec> for String {
    fn from(spec: StrategySpec) -> String {
        spec.to_string()
    }
}

/// A trained network plus bookkeeping about what each stage saw.
#[derive(Clone, Debug)]
pub struct StrategyOutcome {
    pub network: Network,
    /// Rows the full network was trained on.
    pub stage1_rows: usize,
    /// Feature rows extracted before stage-2 resampling (0 without a stage 2).
    pub stage2_extracted_rows: usize,
    /// Feature rows the head was fine-tuned on (0 without a stage 2).
    pub stage2_rows: usize,
    /// Network after stage 1, before any fine-tuning.
    pub stage1_network: Network,
    pub stage1_report: TrainReport,
    pub stage2_report: Option<TrainReport>,
}

/// Trains a network on `train` according to `spec`.
///
/// The seeds inside `stage1` and `stage2` are replaced by substreams of `seed`.
pub fn run_strategy(
    train: &Dataset,
    spec: &StrategySpec,
    net_cfg: &NetConfig,
    stage1: &TrainConfig,
    stage2: &TrainConfig,
    seed: u64,
) -> Result<StrategyOutcome> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let root = SeededRng::new(seed);
    let initial = Network::init(net_cfg, &mut root.substream("init"))?;

    let stage1_data = match spec.first {
        Some(r) => r.resample(train, &mut root.substream("s1.resample"))?,
        None => train.clone(),
    };
    let stage1_cfg = TrainConfig {
        seed: substream_seed(seed, "s1.train"),
        scope: TrainScope::AllParams,
        ..stage1.clone()
    };
    let (trained, stage1_report) = initial.train(&stage1_data, &stage1_cfg)?;

    let Some(second) = spec.second else {
        return Ok(StrategyOutcome {
            stage1_network: trained.clone(),
            network: trained,
            stage1_rows: stage1_data.len(),
            stage2_extracted_rows: 0,
            stage2_rows: 0,
            stage1_report,
            stage2_report: None,
        });
    };

    // Features always come from the original training rows, never synthetic ones.
    let features = train.with_features(trained.extract_features(train.features())?)?;
    let stage2_data = second.resample(&features, &mut root.substream("s2.resample"))?;
    let stage2_cfg = TrainConfig {
        seed: substream_seed(seed, "s2.train"),
        scope: TrainScope::HeadOnly,
        ..stage2.clone()
    };
    let (tuned, stage2_report) = trained.fine_tune_head(&stage2_data, &stage2_cfg)?;
    Ok(StrategyOutcome {
        network: tuned,
        stage1_network: trained,
        stage1_rows: stage1_data.len(),
        stage2_extracted_rows: features.len(),
        stage2_rows: stage2_data.len(),
        stage1_report,
        stage2_report: Some(stage2_report),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub acc: f64,
    pub avacc: f64,
    pub cba: f64,
    pub mavg: f64,
}

impl Evaluation {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self> {
        Ok(Self {
            acc: metrics::accuracy(&confusion)?,
            avacc: metrics::avacc(&confusion)?,
            cba: metrics::cba(&confusion)?,
            mavg: metrics::mavg(&confusion)?,
            confusion,
        })
    }

    /// `(name, value)` in the canonical metric order.
    pub fn named(&self) -> [(&'static str, f64); 4] {
        [
            ("acc", self.acc),
            ("avacc", self.avacc),
            ("cba", self.cba),
            ("mavg", self.mavg),
        ]
    }
}

pub fn evaluate(net: &Network, test: &Dataset) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predicted = net.predict(test.features())?;
    let cm = metrics::confusion(test.labels(), &predicted, test.num_classes())?;
    Evaluation::from_confusion(cm)
}
