//! Residual-variance estimator over a relaxed feature subset.
//!
//! For centered, spectrally scaled rows `X` (N×D), targets `y` and subset
//! weights `s ∈ [0,1]^D`, with `M(s) = triud(X·diag(s)·Xᵀ) = Σ_d s_d G_d`:
//!
//! ```text
//! f(s) = yᵀy/N − Σ_{i<k} a_i / C(N, i+2) · yᵀ M(s)^{i+1} y
//! ```
//!
//! Each term averages products along chains of `i+2` distinct rows, so it
//! estimates `cᵀΣ^i c` with `c = E[x·y]` without the diagonal bias of
//! plain sample moments. `M(s)` is never formed; see [`kernel`].

pub mod kernel;

use serde::{Deserialize, Serialize};

pub use kernel::{triud_outer_apply, triud_outer_apply_transpose, Execution};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::matrix::Matrix;
use kernel::Side;

/// How `N` enters the binomial denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DenominatorPolicy {
    /// `C(n_effective, i+2)`, evaluated as a sum of logs.
    ExactBinomialLog,
    /// `C(min(n_effective, cap), i+2)`.
    Capped(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    order: usize,
    coefficients: Vec<f64>,
    pub denominator: DenominatorPolicy,
    pub execution: Execution,
}

/// Coefficients of the truncated Neumann series `Σ_{j<k} (1−λ)^j` written
/// in powers of `λ`: `a_i = (−1)^i · C(k, i+1)`.
///
/// With the top covariance eigenvalue scaled to 1, `λ·p(λ) = 1 − (1−λ)^k`
/// rises monotonically toward 1 as `k` grows, so higher orders recover more
/// of `cᵀΣ⁻¹c`.
pub fn neumann_coefficients(order: usize) -> Vec<f64> {
    (0..order)
        .map(|i| {
            let c = binomial(order as u64, i as u64 + 1);
            if i % 2 == 0 {
                c
            } else {
                -c
            }
        })
        .collect()
}

fn binomial(n: u64, r: u64) -> f64 {
    (0..r).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

/// `ln C(n, r)` as `Σ_{t<r} ln(n−t) − ln(t+1)`; needs `n ≥ r`.
pub fn ln_binomial(n: usize, r: usize) -> f64 {
    debug_assert!(n >= r);
    (0..r)
        .map(|t| ((n - t) as f64).ln() - ((t + 1) as f64).ln())
        .sum()
}

impl EstimatorConfig {
    /// Order-`k` estimator with Neumann coefficients and exact denominators.
    pub fn new(order: usize) -> Result<Self> {
        Self::with_coefficients(neumann_coefficients(order))
    }

    pub fn with_coefficients(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Config("estimator order must be >= 1".into()));
        }
        if let Some(bad) = coefficients.iter().find(|a| !a.is_finite()) {
            return Err(Error::Config(format!("non-finite coefficient {bad}")));
        }
        Ok(EstimatorConfig {
            order: coefficients.len(),
            coefficients,
            denominator: DenominatorPolicy::ExactBinomialLog,
            execution: Execution::Sequential,
        })
    }

    pub fn with_denominator(mut self, policy: DenominatorPolicy) -> Result<Self> {
        if let DenominatorPolicy::Capped(cap) = policy {
            if cap < self.order + 1 {
                return Err(Error::Config(format!(
                    "denominator cap {cap} below order + 1 = {}",
                    self.order + 1
                )));
            }
        }
        self.denominator = policy;
        Ok(self)
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `b_i = a_i / C(n, i+2)` for the batch's effective size.
    pub fn scaled_coefficients(&self, n_effective: usize) -> Vec<f64> {
        let n = match self.denominator {
            DenominatorPolicy::ExactBinomialLog => n_effective,
            DenominatorPolicy::Capped(cap) => n_effective.min(cap),
        };
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, a)| a * (-ln_binomial(n, i + 2)).exp())
            .collect()
    }
}

/// Transformed rows and targets of one batch.
#[derive(Debug, Clone, Copy)]
pub struct BatchView<'a> {
    pub x: &'a Matrix,
    pub y: &'a [f64],
    /// Sample size used in the binomial denominators.
    pub n_effective: usize,
}

impl<'a> BatchView<'a> {
    pub fn new(x: &'a Matrix, y: &'a [f64]) -> Self {
        assert_eq!(x.rows(), y.len(), "rows and targets differ in length");
        BatchView {
            x,
            y,
            n_effective: y.len(),
        }
    }

    pub fn with_n_effective(mut self, n_effective: usize) -> Self {
        self.n_effective = n_effective;
        self
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    fn check(&self, s: &[f64], cfg: &EstimatorConfig) -> Result<()> {
        if s.len() != self.x.cols() {
            return Err(Error::Config(format!(
                "subset weights have length {}, batch has {} features",
                s.len(),
                self.x.cols()
            )));
        }
        let n_used = match cfg.denominator {
            DenominatorPolicy::ExactBinomialLog => self.n_effective,
            DenominatorPolicy::Capped(cap) => self.n_effective.min(cap),
        };
        if self.rows() == 0 || n_used < cfg.order + 1 {
            return Err(Error::BatchTooSmall {
                rows: self.rows(),
                n_effective: n_used,
                order: cfg.order,
            });
        }
        Ok(())
    }
}

/// `M(s)·v` with `M(s) = Σ_d s_d·triud(X_d X_dᵀ)`.
pub fn operator_apply(batch: &BatchView<'_>, s: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; batch.rows()];
    kernel::apply(batch.x, s, v, &mut out, Side::Upper, Execution::Sequential);
    out
}

/// `M(s)ᵀ·v`.
pub fn operator_apply_transpose(batch: &BatchView<'_>, s: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; batch.rows()];
    kernel::apply(batch.x, s, v, &mut out, Side::Lower, Execution::Sequential);
    out
}

/// Krylov-style sequence `[v, Av, A²v, …]` of `len` vectors.
fn powers(
    batch: &BatchView<'_>,
    s: &[f64],
    len: usize,
    side: Side,
    exec: Execution,
) -> Vec<Vec<f64>> {
    let mut seq = Vec::with_capacity(len);
    seq.push(batch.y.to_vec());
    for m in 1..len {
        let mut next = vec![0.0; batch.rows()];
        kernel::apply(batch.x, s, &seq[m - 1], &mut next, side, exec);
        seq.push(next);
    }
    seq
}

fn base_term(batch: &BatchView<'_>) -> f64 {
    dot(batch.y, batch.y) / batch.rows() as f64
}

/// The estimate `f(s)`.
pub fn objective(batch: &BatchView<'_>, s: &[f64], cfg: &EstimatorConfig) -> Result<f64> {
    batch.check(s, cfg)?;
    let b = cfg.scaled_coefficients(batch.n_effective);
    let mut u = batch.y.to_vec();
    let mut next = vec![0.0; batch.rows()];
    let mut f = base_term(batch);
    for bi in b {
        kernel::apply(batch.x, s, &u, &mut next, Side::Upper, cfg.execution);
        std::mem::swap(&mut u, &mut next);
        f -= bi * dot(batch.y, &u);
    }
    Ok(f)
}

/// `f(s)` and `∂f/∂s` together.
///
/// With `u_m = Mᵐy` and `w_j = (Mᵀ)ʲy`,
/// `∂/∂s_d yᵀM^{i+1}y = Σ_{j≤i} w_jᵀ G_d u_{i−j}`. Regrouping by `m = i−j`
/// gives `∂f/∂s_d = −Σ_m W_mᵀ G_d u_m` with `W_m = Σ_j b_{j+m} w_j`, which
/// needs `k` bilinear sweeps instead of `k(k+1)/2`.
pub fn objective_and_gradient(
    batch: &BatchView<'_>,
    s: &[f64],
    cfg: &EstimatorConfig,
) -> Result<(f64, Vec<f64>)> {
    batch.check(s, cfg)?;
    let k = cfg.order;
    let exec = cfg.execution;
    let b = cfg.scaled_coefficients(batch.n_effective);

    let mut right = powers(batch, s, k + 1, Side::Upper, exec);
    let mut f = base_term(batch);
    for (i, bi) in b.iter().enumerate() {
        f -= bi * dot(batch.y, &right[i + 1]);
    }
    right.truncate(k);

    let left = powers(batch, s, k, Side::Lower, exec);
    let mut grad = vec![0.0; batch.x.cols()];
    let mut combined = vec![0.0; batch.rows()];
    for (m, u) in right.iter().enumerate() {
        combined.iter_mut().for_each(|c| *c = 0.0);
        for (j, w) in left.iter().enumerate().take(k - m) {
            let coef = b[j + m];
            for (c, wi) in combined.iter_mut().zip(w) {
                *c += coef * wi;
            }
        }
        kernel::accumulate_bilinear(batch.x, &combined, u, -1.0, &mut grad, exec);
    }
    Ok((f, grad))
}

pub fn gradient(batch: &BatchView<'_>, s: &[f64], cfg: &EstimatorConfig) -> Result<Vec<f64>> {
    objective_and_gradient(batch, s, cfg).map(|(_, g)| g)
}

/// Gradient by the uncollapsed double sum, one bilinear sweep per
/// `(i, j)` pair: `O(N·D·k²)`. Kept for cross-checking.
pub fn gradient_reference(
    batch: &BatchView<'_>,
    s: &[f64],
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>> {
    batch.check(s, cfg)?;
    let k = cfg.order;
    let b = cfg.scaled_coefficients(batch.n_effective);
    let right = powers(batch, s, k, Side::Upper, Execution::Sequential);
    let left = powers(batch, s, k, Side::Lower, Execution::Sequential);
    let mut grad = vec![0.0; batch.x.cols()];
    for (i, bi) in b.iter().enumerate() {
        for j in 0..=i {
            kernel::accumulate_bilinear(
                batch.x,
                &left[j],
                &right[i - j],
                -bi,
                &mut grad,
                Execution::Sequential,
            );
        }
    }
    Ok(grad)
}

/// Raw chain moments `T_i = yᵀM(s)^{i+1}y` for `i < order`.
pub fn chain_moments(batch: &BatchView<'_>, s: &[f64], order: usize) -> Vec<f64> {
    let right = powers(batch, s, order + 1, Side::Upper, Execution::Sequential);
    right[1..].iter().map(|u| dot(batch.y, u)).collect()
}
