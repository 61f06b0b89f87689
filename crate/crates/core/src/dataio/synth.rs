use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Parameters of the equicorrelated Gaussian generator.
///
/// Each row is `x = sqrt(ρ)·f + sqrt(1-ρ)·e` with a shared factor `f` and
/// independent `e_j`, so every pair of features has correlation `ρ`. The
/// label is the sign of `Σ_{j∈S} x_j + noise_std·ε` for the support `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_features: usize,
    pub support_size: usize,
    pub noise_std: f64,
    pub feature_correlation: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.support_size > self.n_features {
            return Err(Error::Config(format!(
                "support size {} exceeds feature count {}",
                self.support_size, self.n_features
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!(
                "noise_std {} must be finite and >= 0",
                self.noise_std
            )));
        }
        if !(0.0..1.0).contains(&self.feature_correlation) {
            return Err(Error::Config(format!(
                "feature correlation {} not in [0, 1)",
                self.feature_correlation
            )));
        }
        Ok(())
    }

    /// Population residual variance of the best linear predictor of the ±1
    /// label from the support features.
    ///
    /// For jointly Gaussian `(x, z)`, `Cov(x, sign z) = sqrt(2/π)·Cov(x, z)/σ_z`,
    /// so the explained part is `(2/π)·R²` where `R²` is the share of
    /// `Var(z)` carried by the support, and `Var(label) = 1`.
    pub fn true_residual_variance(&self) -> f64 {
        let s = self.support_size as f64;
        let signal = s + self.feature_correlation * s * (s - 1.0);
        let total = signal + self.noise_std * self.noise_std;
        if total == 0.0 {
            return 1.0;
        }
        1.0 - (2.0 / PI) * signal / total
    }
}

/// Draws a dataset and returns it with the sorted true support.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(Dataset, Vec<usize>)> {
    spec.validate()?;
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let d = spec.n_features;

    let mut support = index::sample(&mut rng, d, spec.support_size).into_vec();
    support.sort_unstable();

    let shared = spec.feature_correlation.sqrt();
    let own = (1.0 - spec.feature_correlation).sqrt();
    let mut x = Matrix::zeros(spec.n_rows, d);
    let mut labels = Vec::with_capacity(spec.n_rows);
    for i in 0..spec.n_rows {
        let f: f64 = StandardNormal.sample(&mut rng);
        let row = x.row_mut(i);
        for xj in row.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *xj = shared * f + own * e;
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        let latent: f64 = support.iter().map(|&j| row[j]).sum::<f64>() + spec.noise_std * eps;
        let label = if latent > 0.0 {
            1.0
        } else if latent < 0.0 {
            -1.0
        } else if rng.random::<bool>() {
            1.0
        } else {
            -1.0
        };
        labels.push(label);
    }
    let name = format!(
        "synth-n{}-d{}-s{}-seed{}",
        spec.n_rows, d, spec.support_size, spec.seed
    );
    Ok((Dataset::dense(name, x, labels)?, support))
}
