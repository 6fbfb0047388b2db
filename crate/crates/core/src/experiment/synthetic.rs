use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;
use crate::training::LabelSet;

/// Two balanced isotropic Gaussian clusters.
///
/// Class means sit at `offset·1 ∓ (separation/2)·u` for a seeded random
/// unit direction `u`; each coordinate gets independent `N(0, std²)` noise.
/// The shared offset keeps cosine similarities away from zero the way
/// non-negative CNN activations do. Rows `0..n_per_class` are class 0,
/// the rest class 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_per_class: usize,
    pub dim: usize,
    /// Distance between the two class means.
    pub separation: f64,
    /// Per-coordinate standard deviation within a class.
    pub std: f64,
    /// Per-coordinate shift shared by both classes.
    pub offset: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.n_per_class == 0 || self.dim == 0 {
            return bad("n_per_class and dim must be positive".into());
        }
        if !(self.separation >= 0.0) || !self.separation.is_finite() {
            return bad(format!("separation must be >= 0, got {}", self.separation));
        }
        if !(self.std > 0.0) || !self.std.is_finite() {
            return bad(format!("std must be > 0, got {}", self.std));
        }
        if !self.offset.is_finite() {
            return bad(format!("offset must be finite, got {}", self.offset));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Matrix, LabelSet)> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let direction: Vec<f64> = {
        let raw: Vec<f64> = (0..spec.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        raw.into_iter().map(|v| v / norm).collect()
    };
    let noise = Normal::new(0.0, spec.std).expect("std validated");
    let n = 2 * spec.n_per_class;
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for class in 0..2usize {
        let sign = if class == 1 { 0.5 } else { -0.5 };
        for _ in 0..spec.n_per_class {
            for &u in &direction {
                let mean = spec.offset + sign * spec.separation * u;
                data.push(mean + noise.sample(&mut rng));
            }
            labels.push(class);
        }
    }
    let features = Matrix::new(n, spec.dim, data)?;
    Ok((features, LabelSet::fully_labeled(labels)))
}
