//! Artificial imbalance induction on a balanced dataset.
//!
//! Classes are placed along a random `class_order`; the class at position
//! `i` (1-based) keeps `floor(n / r_i)` of its `n` rows, where the ratio
//! `r_i` depends on the scenario and the imbalance ratio (IR):
//!
//! * linear: `r_i = 1 + (IR - 1) / (M - 1) * (i - 1)`
//! * single majority / single minority / half minority: `r_i = IR` for
//!   minority positions, `1` otherwise.
//!
//! Induction across several IR levels is nested: each class's rows are
//! shuffled once and level `l` keeps a prefix of that shuffle, so the
//! dataset at a higher IR is always a subset of the one at a lower IR.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Linear,
    SingleMajority,
    SingleMinority,
    HalfMinority,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Linear,
        Scenario::SingleMajority,
        Scenario::SingleMinority,
        Scenario::HalfMinority,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Linear => "linear",
            Scenario::SingleMajority => "single-majority",
            Scenario::SingleMinority => "single-minority",
            Scenario::HalfMinority => "half-minority",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// How the linear scenario interpolates between the largest and smallest class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioMode {
    /// Ratios interpolate linearly from 1 to IR.
    #[default]
    RatioLinear,
    /// Counts interpolate linearly from `n` to `n / IR`.
    CountLinear,
}

impl fmt::Display for RatioMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RatioMode::RatioLinear => "ratio-linear",
            RatioMode::CountLinear => "count-linear",
        })
    }
}

impl FromStr for RatioMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "ratio-linear" | "ratio" => Ok(RatioMode::RatioLinear),
            "count-linear" | "count" => Ok(RatioMode::CountLinear),
            _ => Err(Error::Config(format!("unknown ratio mode `{s}`"))),
        }
    }
}

/// Checks that `order` is a permutation of `0..m`.
pub fn validate_order(order: &[usize], m: usize) -> Result<()> {
    if order.len() != m {
        return Err(Error::Config(format!(
            "class order has {} entries, expected {m}",
            order.len()
        )));
    }
    let mut seen = vec![false; m];
    for &c in order {
        if c >= m || std::mem::replace(&mut seen[c], true) {
            return Err(Error::Config(format!(
                "class order {order:?} is not a permutation of 0..{m}"
            )));
        }
    }
    Ok(())
}

/// Uniformly random class ordering.
pub fn random_class_order(m: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    order
}

fn minority_at_position(scenario: Scenario, position: usize, m: usize) -> bool {
    match scenario {
        Scenario::SingleMajority => position > 0,
        Scenario::SingleMinority => position == 0,
        Scenario::HalfMinority => position < m / 2,
        // Only the first position keeps ratio 1 under linear imbalance.
        Scenario::Linear => position > 0,
    }
}

/// Minority flag for every class, indexed by class id.
pub fn minority_mask(scenario: Scenario, class_order: &[usize], m: usize) -> Result<Vec<bool>> {
    validate_order(class_order, m)?;
    let mut mask = vec![false; m];
    for (pos, &class) in class_order.iter().enumerate() {
        mask[class] = minority_at_position(scenario, pos, m);
    }
    Ok(mask)
}

/// Ratios `r_i` indexed by position along the class order.
pub fn class_ratios(scenario: Scenario, ir: f64, m: usize, mode: RatioMode) -> Result<Vec<f64>> {
    if !(ir >= 1.0) || !ir.is_finite() {
        return Err(Error::Config(format!("imbalance ratio must be >= 1, got {ir}")));
    }
    if m < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {m}")));
    }
    let span = (m - 1) as f64;
    Ok((0..m)
        .map(|pos| match (scenario, mode) {
            (Scenario::Linear, RatioMode::RatioLinear) => 1.0 + (ir - 1.0) / span * pos as f64,
            (Scenario::Linear, RatioMode::CountLinear) => 1.0 / (1.0 - (1.0 - 1.0 / ir) * pos as f64 / span),
            _ if minority_at_position(scenario, pos, m) => ir,
            _ => 1.0,
        })
        .collect())
}

/// `floor(x)`, except that values within a relative 1e-9 of an integer snap to it,
/// so that exact quotients such as 625 / (25/7) are not lost to rounding.
fn snapped_floor(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest
    } else {
        x.floor()
    }
}

/// Desired count `floor(n / r_i)` for every ratio.
pub fn target_counts(ratios: &[f64], n: usize) -> Result<Vec<usize>> {
    ratios
        .iter()
        .enumerate()
        .map(|(pos, &r)| {
            if !(r >= 1.0) {
                return Err(Error::Config(format!("ratio {r} at position {pos} is below 1")));
            }
            let count = snapped_floor(n as f64 / r) as usize;
            if count == 0 {
                Err(Error::Config(format!(
                    "ratio {r} leaves no observations of {n} at position {pos}"
                )))
            } else {
                Ok(count)
            }
        })
        .collect()
}

/// Everything needed to reproduce one induction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImbalancePlan {
    pub scenario: Scenario,
    pub class_order: Vec<usize>,
    pub levels: Vec<f64>,
    pub n_per_class: usize,
    #[serde(default)]
    pub ratio_mode: RatioMode,
}

impl ImbalancePlan {
    pub fn validate(&self) -> Result<()> {
        validate_order(&self.class_order, self.class_order.len())?;
        if self.levels.is_empty() {
            return Err(Error::Config("no imbalance levels given".into()));
        }
        if !(self.levels[0] >= 1.0) {
            return Err(Error::Config(format!(
                "imbalance levels must be >= 1, got {}",
                self.levels[0]
            )));
        }
        if self.levels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(format!(
                "imbalance levels must be strictly ascending: {:?}",
                self.levels
            )));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.class_order.len()
    }

    pub fn ratios(&self, ir: f64) -> Result<Vec<f64>> {
        class_ratios(self.scenario, ir, self.num_classes(), self.ratio_mode)
    }

    /// Target counts along the class order for the plan's `n_per_class`.
    pub fn position_counts(&self, ir: f64) -> Result<Vec<usize>> {
        target_counts(&self.ratios(ir)?, self.n_per_class)
    }

    /// Total number of observations kept at `ir`.
    pub fn total_observations(&self, ir: f64) -> Result<usize> {
        Ok(self.position_counts(ir)?.iter().sum())
    }

    /// Target count for every class id, given each class's available rows.
    pub fn class_targets(&self, ir: f64, available: &[usize]) -> Result<Vec<usize>> {
        let ratios = self.ratios(ir)?;
        let mut targets = vec![0; self.num_classes()];
        for (pos, &class) in self.class_order.iter().enumerate() {
            targets[class] = target_counts(&ratios[pos..=pos], available[class])?[0];
        }
        Ok(targets)
    }
}

/// Row indices (ascending) kept at every level of `plan`.
pub fn induce_indices(ds: &Dataset, plan: &ImbalancePlan, rng: &mut SeededRng) -> Result<Vec<Vec<usize>>> {
    plan.validate()?;
    if plan.num_classes() != ds.num_classes() {
        return Err(Error::Config(format!(
            "plan covers {} classes, dataset has {}",
            plan.num_classes(),
            ds.num_classes()
        )));
    }
    let mut by_class = ds.class_indices();
    if let Some(class) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(class));
    }
    for rows in &mut by_class {
        rows.shuffle(rng);
    }
    let available: Vec<usize> = by_class.iter().map(Vec::len).collect();
    plan.levels
        .iter()
        .map(|&ir| {
            let targets = plan.class_targets(ir, &available)?;
            let mut keep: Vec<usize> = by_class
                .iter()
                .zip(&targets)
                .flat_map(|(rows, &t)| rows[..t].iter().copied())
                .collect();
            keep.sort_unstable();
            Ok(keep)
        })
        .collect()
}

/// One dataset per level, rows in their original relative order.
pub fn induce(ds: &Dataset, plan: &ImbalancePlan, rng: &mut SeededRng) -> Result<Vec<Dataset>> {
    induce_indices(ds, plan, rng)?
        .iter()
        .map(|idx| ds.take_subset(idx))
        .collect()
}
