//! Seeded Gaussian noise synthesis.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::field::ScalarField;

#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    /// Noise variance (intensity squared).
    pub variance: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(variance: f64, seed: u64) -> Result<Self> {
        if variance.is_nan() || variance < 0.0 || variance.is_infinite() {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be >= 0, got {variance}"
            )));
        }
        Ok(Self { variance, seed })
    }
}

/// Adds i.i.d. `N(0, variance)` noise per pixel, deterministic under the
/// seed. Values are not clipped; clamping happens only when saving images.
pub fn add_noise(ground_truth: &ScalarField, spec: &NoiseSpec) -> Result<ScalarField> {
    if spec.variance == 0.0 {
        return Ok(ground_truth.clone());
    }
    let normal = Normal::new(0.0, spec.variance.sqrt())
        .map_err(|e| Error::InvalidConfig(format!("bad noise distribution: {e}")))?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    Ok(ground_truth.map(|v| v + normal.sample(&mut rng)))
}
