//! Downstream evaluation: logistic regression on a feature subset, AUC, and
//! the paired t-test used to compare selectors across subset sizes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::linalg::power_iteration;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogRegMode {
    /// Full-gradient descent with a fixed step.
    Batch,
    /// Shuffled mini-batch SGD for a fixed number of epochs.
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub mode: LogRegMode,
    /// Step size. In batch mode `None` means `1/L` for the smoothness
    /// constant `L` of the loss; in SGD mode it means 0.1.
    pub learning_rate: Option<f64>,
    pub l2: f64,
    pub epochs: usize,
    pub sgd_batch_size: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            mode: LogRegMode::Batch,
            learning_rate: None,
            l2: 1e-6,
            epochs: 5,
            sgd_batch_size: 32,
            max_iterations: 5000,
            tolerance: 1e-8,
            seed: 0,
        }
    }
}

impl LogRegConfig {
    /// Short stable fingerprint (FNV-1a of the JSON form).
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Logistic model on standardized inputs; `decision` takes raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub iterations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

impl LogRegModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        let mut z = self.bias;
        for (j, &x) in row.iter().enumerate() {
            z += self.weights[j] * (x - self.means[j]) / self.scales[j];
        }
        z
    }

    pub fn decisions(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.decision(x.row(i))).collect()
    }
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn standardize(x: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
    let (n, m) = (x.rows(), x.cols());
    let mut means = vec![0.0; m];
    for i in 0..n {
        for (a, b) in means.iter_mut().zip(x.row(i)) {
            *a += b;
        }
    }
    means.iter_mut().for_each(|a| *a /= n as f64);
    let mut scales = vec![0.0; m];
    for i in 0..n {
        for ((s, b), mu) in scales.iter_mut().zip(x.row(i)).zip(&means) {
            *s += (b - mu) * (b - mu);
        }
    }
    for s in scales.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }
    let mut z = x.clone();
    for i in 0..n {
        for ((v, mu), s) in z.row_mut(i).iter_mut().zip(&means).zip(&scales) {
            *v = (*v - mu) / s;
        }
    }
    (z, means, scales)
}

fn loss(z: &Matrix, y: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = z.rows();
    let mut total = 0.0;
    for i in 0..n {
        let margin = y[i] * (crate::linalg::dot(z.row(i), w) + b);
        total += softplus(-margin);
    }
    total / n as f64 + 0.5 * l2 * crate::linalg::dot(w, w)
}

/// Accumulates the loss gradient over `rows` into `gw`, `gb` (unscaled).
fn accumulate_grad(
    z: &Matrix,
    y: &[f64],
    w: &[f64],
    b: f64,
    rows: &[usize],
    gw: &mut [f64],
    gb: &mut f64,
) {
    for &i in rows {
        let zi = z.row(i);
        let margin = y[i] * (crate::linalg::dot(zi, w) + b);
        let coef = -y[i] * sigmoid(-margin);
        for (g, x) in gw.iter_mut().zip(zi) {
            *g += coef * x;
        }
        *gb += coef;
    }
}

/// Fits an L2-regularized logistic regression on dense features `x`.
pub fn fit_logreg(x: &Matrix, y: &[f64], cfg: &LogRegConfig) -> Result<LogRegModel> {
    let (n, m) = (x.rows(), x.cols());
    if m == 0 {
        return Err(Error::EmptySubset);
    }
    if y.len() != n {
        return Err(Error::Data(format!("{n} rows but {} labels", y.len())));
    }
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass);
    }
    if !(cfg.l2 >= 0.0) {
        return Err(Error::Config(format!("l2 must be >= 0, got {}", cfg.l2)));
    }
    let (z, means, scales) = standardize(x);
    let mut w = vec![0.0; m];
    let mut b = 0.0;
    let initial_loss = loss(&z, y, &w, b, cfg.l2);
    let mut iterations = 0;
    let mut gw = vec![0.0; m];

    match cfg.mode {
        LogRegMode::Batch => {
            let step = match cfg.learning_rate {
                Some(lr) => lr,
                None => {
                    // Standardized columns are centered, so the intercept
                    // block decouples and the Hessian bound is
                    // 0.25·max(λ_max(ZᵀZ/n), 1) + l2.
                    let top = power_iteration(
                        m,
                        |v, out| {
                            for i in 0..n {
                                let zi = z.row(i);
                                let t = crate::linalg::dot(zi, v) / n as f64;
                                for (o, x) in out.iter_mut().zip(zi) {
                                    *o += t * x;
                                }
                            }
                        },
                        100,
                        1e-4,
                        cfg.seed,
                    );
                    1.0 / (0.25 * (1.01 * top.eigenvalue).max(1.0) + cfg.l2)
                }
            };
            let all: Vec<usize> = (0..n).collect();
            let mut previous = initial_loss;
            for it in 1..=cfg.max_iterations {
                gw.iter_mut().for_each(|g| *g = 0.0);
                let mut gb = 0.0;
                accumulate_grad(&z, y, &w, b, &all, &mut gw, &mut gb);
                for (wj, g) in w.iter_mut().zip(&gw) {
                    *wj -= step * (g / n as f64 + cfg.l2 * *wj);
                }
                b -= step * gb / n as f64;
                iterations = it;
                let current = loss(&z, y, &w, b, cfg.l2);
                if !current.is_finite() {
                    return Err(Error::NonFinite {
                        step: it,
                        detail: format!("logistic loss {current}"),
                    });
                }
                if (previous - current).abs() < cfg.tolerance * previous.abs().max(1e-300) {
                    break;
                }
                previous = current;
            }
        }
        LogRegMode::Sgd => {
            let lr = cfg.learning_rate.unwrap_or(0.1);
            let bs = cfg.sgd_batch_size.max(1);
            let mut rng = StdRng::seed_from_u64(cfg.seed);
            let mut order: Vec<usize> = (0..n).collect();
            for _ in 0..cfg.epochs {
                order.shuffle(&mut rng);
                for chunk in order.chunks(bs) {
                    gw.iter_mut().for_each(|g| *g = 0.0);
                    let mut gb = 0.0;
                    accumulate_grad(&z, y, &w, b, chunk, &mut gw, &mut gb);
                    let inv = 1.0 / chunk.len() as f64;
                    for (wj, g) in w.iter_mut().zip(&gw) {
                        *wj -= lr * (g * inv + cfg.l2 * *wj);
                    }
                    b -= lr * gb * inv;
                    iterations += 1;
                }
                if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
                    return Err(Error::NonFinite {
                        step: iterations,
                        detail: "SGD weights diverged".into(),
                    });
                }
            }
        }
    }
    let final_loss = loss(&z, y, &w, b, cfg.l2);
    Ok(LogRegModel {
        weights: w,
        bias: b,
        means,
        scales,
        iterations,
        initial_loss,
        final_loss,
    })
}

/// Area under the ROC curve via the Mann–Whitney statistic, with tied
/// scores counted as half a concordant pair. `O(n log n)`.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Data(format!("score {bad} is not comparable")));
    }
    let n_pos = labels.iter().filter(|&&y| y > 0.0).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the concordant count plus ties, kept exact in integers.
    let mut doubled: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p, mut q) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] > 0.0 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        doubled += 2 * p * neg_below + p * q;
        neg_below += q;
        i = j;
    }
    Ok(doubled as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub t: f64,
    pub p_value: f64,
    pub df: usize,
    /// Set when the differences have zero variance.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a − b`.
///
/// Zero-variance differences are flagged degenerate: all-zero differences
/// give `t = 0, p = 1`; a constant nonzero shift gives `t = ±∞, p = 0`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::Data(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Data("paired t-test needs at least 2 pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 || diffs.iter().all(|&d| d == diffs[0]) {
        let (t, p_value) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean), 0.0)
        };
        return Ok(PairedTTest {
            t,
            p_value,
            df,
            degenerate: true,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Data(e.to_string()))?;
    let p_value = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(PairedTTest {
        t,
        p_value,
        df,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub selector: String,
    pub sizes: Vec<usize>,
    pub aucs: Vec<f64>,
    pub seconds: Vec<f64>,
    pub config_digest: String,
}

impl EvalReport {
    /// CSV with columns `selector,size,auc,seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("selector,size,auc,seconds\n");
        for ((m, a), s) in self.sizes.iter().zip(&self.aucs).zip(&self.seconds) {
            let _ = writeln!(out, "{},{},{},{:.6}", self.selector, m, a, s);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Test AUC of a logistic model trained on the top-`m` features of
/// `ranking`, for each distinct size in `sizes` (ascending).
pub fn evaluate_selector(
    selector: &str,
    ranking: &[usize],
    sizes: &[usize],
    train: &Dataset,
    test: &Dataset,
    cfg: &LogRegConfig,
) -> Result<EvalReport> {
    if train.n_features() != test.n_features() {
        return Err(Error::Data(format!(
            "train has {} features, test has {}",
            train.n_features(),
            test.n_features()
        )));
    }
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if let Some(&m) = sizes
        .iter()
        .find(|&&m| m > ranking.len() || m > train.n_features())
    {
        return Err(Error::Config(format!(
            "subset size {m} exceeds available ranked features ({})",
            ranking.len().min(train.n_features())
        )));
    }
    let mut report = EvalReport {
        selector: selector.to_string(),
        sizes: sizes.clone(),
        aucs: Vec::with_capacity(sizes.len()),
        seconds: Vec::with_capacity(sizes.len()),
        config_digest: cfg.digest(),
    };
    for &m in &sizes {
        let start = Instant::now();
        let value = subset_auc(&ranking[..m], train, test, cfg)?;
        report.aucs.push(value);
        report.seconds.push(start.elapsed().as_secs_f64());
    }
    Ok(report)
}

/// Fits on `train` restricted to `features` and scores `test`.
pub fn subset_auc(
    features: &[usize],
    train: &Dataset,
    test: &Dataset,
    cfg: &LogRegConfig,
) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::EmptySubset);
    }
    let x_train = train.columns_dense(features)?;
    let model = fit_logreg(&x_train, train.labels(), cfg)?;
    let x_test = test.columns_dense(features)?;
    auc(&model.decisions(&x_test), test.labels())
}
