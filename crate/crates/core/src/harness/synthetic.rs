//! Isotropic Gaussian blobs as a stand-in benchmark.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

const MAX_CENTER_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub dims: usize,
    /// Standard deviation of every blob along every axis.
    pub cluster_spread: f64,
    /// Minimum distance between any two blob centres.
    pub class_separation: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 8,
            samples_per_class: 200,
            dims: 16,
            cluster_spread: 1.0,
            class_separation: 3.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.samples_per_class == 0 || self.dims == 0 {
            return Err(Error::Config(format!(
                "synthetic data needs >= 2 classes and positive sizes: {self:?}"
            )));
        }
        if !(self.cluster_spread > 0.0 && self.class_separation > 0.0)
            || !self.cluster_spread.is_finite()
            || !self.class_separation.is_finite()
        {
            return Err(Error::Config(format!(
                "spread and separation must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Blob centres drawn uniformly from a cube whose half-width is
/// `separation * max(1, M^(1/D))`, rejecting any centre closer than
/// `separation` to an earlier one.
fn sample_centers(spec: &SyntheticSpec, rng: &mut SeededRng, max_attempts: usize) -> Result<Vec<Vec<f64>>> {
    let half_width = spec.class_separation * (spec.num_classes as f64).powf(1.0 / spec.dims as f64).max(1.0);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(spec.num_classes);
    for _ in 0..spec.num_classes {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::Sampling(format!(
                    "could not place {} centres {} apart after {max_attempts} attempts; \
                     try a smaller class separation",
                    spec.num_classes, spec.class_separation
                )));
            }
            let candidate: Vec<f64> = (0..spec.dims)
                .map(|_| rng.random_range(-half_width..=half_width))
                .collect();
            let far_enough = centers.iter().all(|c| {
                let d2: f64 = c.iter().zip(&candidate).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() >= spec.class_separation
            });
            if far_enough {
                centers.push(candidate);
                break;
            }
        }
    }
    Ok(centers)
}

/// `samples_per_class` rows per class, class after class.
pub fn generate_synthetic(spec: &SyntheticSpec, rng: &mut SeededRng) -> Result<Dataset> {
    spec.validate()?;
    let centers = sample_centers(spec, rng, MAX_CENTER_ATTEMPTS)?;
    let n = spec.num_classes * spec.samples_per_class;
    let mut data = Vec::with_capacity(n * spec.dims);
    let mut labels = Vec::with_capacity(n);
    for (class, center) in centers.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            for &c in center {
                let z: f64 = rng.sample(StandardNormal);
                data.push(c + spec.cluster_spread * z);
            }
            labels.push(class);
        }
    }
    Dataset::new(Matrix::new(n, spec.dims, data)?, labels, spec.num_classes)
}
