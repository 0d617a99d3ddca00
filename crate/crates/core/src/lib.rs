//! Two-stage resampling for imbalanced multi-class classification.
//!
//! Oversample in input space, train a network, extract its high-level
//! features, resample those, and fine-tune only the classifier head. The
//! crate also carries the pieces needed to evaluate such strategies:
//! controlled imbalance induction, RUS/ROS/SMOTE, imbalance-aware metrics and
//! a resumable experiment grid.

pub mod dataset;
pub mod error;
pub mod harness;
pub mod imbalance;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod resampling;
pub mod rng;

pub use dataset::{stratified_kfold, Dataset, FoldAssignment};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::SeededRng;
