//! Per-feature centering and global spectral scaling.
//!
//! The estimator expects centered features whose covariance has top
//! eigenvalue 1. [`fit_stats`] measures the means and that eigenvalue
//! (matrix-free, on an optional row subsample); [`transform_batch`] applies
//! them to any set of rows and always returns a dense block.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{subsample, Dataset};
use crate::error::{Error, Result};
use crate::linalg::power_iteration;
use crate::matrix::Matrix;

pub const POWER_MAX_ITER: usize = 200;
pub const POWER_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub means: Vec<f64>,
    /// Top eigenvalue of the centered covariance `(1/n)·X_cᵀX_c`.
    pub spectral_scale: f64,
    pub fitted_on: usize,
    /// Mean label of the fitting rows, used only when label centering is on.
    pub label_mean: f64,
}

/// Fits means and spectral scale, on a seeded subsample of
/// `subsample_size` rows when one is given and smaller than the data.
pub fn fit_stats(
    ds: &Dataset,
    subsample_size: Option<usize>,
    seed: u64,
) -> Result<PreprocessStats> {
    let sample;
    let data = match subsample_size {
        Some(m) if m < ds.n_rows() => {
            sample = subsample(ds, m, seed);
            &sample
        }
        _ => ds,
    };
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::Data(format!(
            "need at least 2 rows to fit preprocessing, got {n}"
        )));
    }
    let d = data.n_features();
    let inv_n = 1.0 / n as f64;

    let mut means = vec![0.0; d];
    for i in 0..n {
        for (j, x) in data.row(i).iter() {
            means[j] += x;
        }
    }
    means.iter_mut().for_each(|m| *m *= inv_n);
    let label_mean = data.labels().iter().sum::<f64>() * inv_n;

    // Σw = (1/n)·(Xᵀt − μ·Σt) with t = Xw − (μ·w)1, so sparse rows stay sparse.
    let mut t = vec![0.0; n];
    let apply = |w: &[f64], out: &mut [f64]| {
        let mu_w: f64 = means.iter().zip(w).map(|(m, w)| m * w).sum();
        let mut t_sum = 0.0;
        for (i, ti) in t.iter_mut().enumerate() {
            *ti = data.row(i).dot(w) - mu_w;
            t_sum += *ti;
        }
        for (i, &ti) in t.iter().enumerate() {
            for (j, x) in data.row(i).iter() {
                out[j] += x * ti;
            }
        }
        for (o, m) in out.iter_mut().zip(&means) {
            *o = (*o - m * t_sum) * inv_n;
        }
    };
    let top = power_iteration(d, apply, POWER_MAX_ITER, POWER_REL_TOL, seed);

    let mut total_var = 0.0;
    let mut scale = 0.0;
    for i in 0..n {
        let mut sq = 0.0;
        let mut cross = 0.0;
        for (j, x) in data.row(i).iter() {
            sq += x * x;
            cross += x * means[j];
        }
        total_var += sq - 2.0 * cross;
        scale += sq;
    }
    total_var = total_var * inv_n + means.iter().map(|m| m * m).sum::<f64>();
    if !(top.eigenvalue > 0.0) || total_var <= 1e-24 * (scale * inv_n).max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(
            "all features are constant; covariance has no positive eigenvalue".into(),
        ));
    }
    Ok(PreprocessStats {
        means,
        spectral_scale: top.eigenvalue,
        fitted_on: n,
        label_mean,
    })
}

/// `(x − means) / sqrt(spectral_scale)` for the listed rows, dense.
pub fn transform_batch(ds: &Dataset, rows: &[usize], stats: &PreprocessStats) -> Matrix {
    let d = ds.n_features();
    debug_assert_eq!(stats.means.len(), d);
    let inv = 1.0 / stats.spectral_scale.sqrt();
    let mut out = Matrix::zeros(rows.len(), d);
    for (r, &i) in rows.iter().enumerate() {
        let dst = out.row_mut(r);
        ds.row(i).scatter_into(dst);
        for (x, m) in dst.iter_mut().zip(&stats.means) {
            *x = (*x - m) * inv;
        }
    }
    out
}

/// Every row of the dataset, transformed.
pub fn transform_all(ds: &Dataset, stats: &PreprocessStats) -> Matrix {
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    transform_batch(ds, &rows, stats)
}

/// Labels as regression targets: unchanged, or minus the fitting-sample
/// label mean when `center` is set.
pub fn transform_labels(labels: &[f64], stats: &PreprocessStats, center: bool) -> Vec<f64> {
    if center {
        labels.iter().map(|y| y - stats.label_mean).collect()
    } else {
        labels.to_vec()
    }
}

impl PreprocessStats {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stats: PreprocessStats = serde_json::from_str(&text)?;
        if !(stats.spectral_scale > 0.0) || stats.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Data(format!(
                "{}: invalid preprocessing stats",
                path.display()
            )));
        }
        Ok(stats)
    }
}
