//! Penalized gradient search over the squashed relaxation.
//!
//! Minimizes `f(σ(2v)) + (λ/D)·Σ_d σ(2v_d)` over `v ∈ ℝ^D` with Adam,
//! starting from `v = 0`. Full-batch runs stop on the relative change of
//! the penalized objective; mini-batch runs smooth that signal with an
//! exponential moving average first and also stop at the epoch budget.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{objective_and_gradient, BatchView, EstimatorConfig};
use crate::preprocess::{transform_all, transform_batch, PreprocessStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_iterations: usize,
    pub rel_tolerance: f64,
    pub epochs: usize,
    /// Rows per micro-batch; `None` trains on the full set every step.
    pub mini_batch_size: Option<usize>,
    /// Rows accumulated per Adam step in mini-batch mode.
    pub accumulation_target: usize,
    /// Decay of the moving average used by the mini-batch stopping test.
    pub ema_decay: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_iterations: 1000,
            rel_tolerance: 1e-5,
            epochs: 1,
            mini_batch_size: None,
            accumulation_target: 1000,
            ema_decay: 0.9,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("adam_eps", self.adam_eps),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        // Zero disables the tolerance test.
        if !(self.rel_tolerance >= 0.0 && self.rel_tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "rel_tolerance must be finite and >= 0, got {}",
                self.rel_tolerance
            )));
        }
        for (name, value) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
            ("ema_decay", self.ema_decay),
        ] {
            if !(0.0..1.0).contains(&value) {
                return Err(Error::Config(format!(
                    "{name} must lie in [0, 1), got {value}"
                )));
            }
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.mini_batch_size == Some(0) {
            return Err(Error::Config("mini-batch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub objective: f64,
    pub penalty: f64,
    pub mean_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxIterations,
    RelativeTolerance,
    EpochBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    pub v: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub step: usize,
    pub lambda: f64,
    pub trace: Vec<TracePoint>,
    pub stop_reason: Option<StopReason>,
}

impl SelectionState {
    pub fn new(n_features: usize, lambda: f64) -> Self {
        SelectionState {
            v: vec![0.0; n_features],
            adam_m: vec![0.0; n_features],
            adam_v: vec![0.0; n_features],
            step: 0,
            lambda,
            trace: Vec::new(),
            stop_reason: None,
        }
    }

    pub fn scores(&self) -> Vec<f64> {
        squash(&self.v)
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `s_d = σ(2 v_d)`.
pub fn squash(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| sigmoid(2.0 * x)).collect()
}

/// `d s_d / d v_d = 2 σ(2v_d)(1 − σ(2v_d))`.
#[inline]
fn squash_slope(x: f64) -> f64 {
    let s = sigmoid(2.0 * x);
    2.0 * s * (1.0 - s)
}

/// `(λ/D)·Σ σ(2v_d)` and its gradient in `v`.
pub fn penalty_and_grad(v: &[f64], lambda: f64, n_features: usize) -> (f64, Vec<f64>) {
    if lambda == 0.0 {
        return (0.0, vec![0.0; v.len()]);
    }
    let w = lambda / n_features as f64;
    let value = w * v.iter().map(|&x| sigmoid(2.0 * x)).sum::<f64>();
    let grad = v.iter().map(|&x| w * squash_slope(x)).collect();
    (value, grad)
}

/// Chain rule through the squashing: `∂/∂v_d = ∂/∂s_d · 2σ(2v_d)(1 − σ(2v_d))`.
pub fn chain_gradient(grad_s: &[f64], v: &[f64]) -> Vec<f64> {
    assert_eq!(grad_s.len(), v.len(), "length mismatch");
    grad_s
        .iter()
        .zip(v)
        .map(|(g, &x)| g * squash_slope(x))
        .collect()
}

/// One bias-corrected Adam update of `state.v`.
pub fn adam_step(state: &mut SelectionState, grad_v: &[f64], cfg: &OptimizerConfig) -> Result<()> {
    let bad: Vec<usize> = grad_v
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_finite())
        .map(|(d, _)| d)
        .collect();
    if !bad.is_empty() {
        let mut detail = format!("{} non-finite gradient coordinates, first:", bad.len());
        for d in bad.iter().take(8) {
            let _ = write!(detail, " {d}={}", grad_v[*d]);
        }
        return Err(Error::NonFinite {
            step: state.step + 1,
            detail,
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((v, m), s), &g) in state
        .v
        .iter_mut()
        .zip(state.adam_m.iter_mut())
        .zip(state.adam_v.iter_mut())
        .zip(grad_v)
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *s = b2 * *s + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let s_hat = *s / c2;
        *v -= cfg.learning_rate * m_hat / (s_hat.sqrt() + cfg.adam_eps);
    }
    Ok(())
}

/// Fresh run from `v = 0`.
pub fn fit(
    train: &Dataset,
    stats: &PreprocessStats,
    est_cfg: &EstimatorConfig,
    opt_cfg: &OptimizerConfig,
    lambda: f64,
) -> Result<SelectionState> {
    let mut state = SelectionState::new(train.n_features(), lambda);
    fit_from(&mut state, train, stats, est_cfg, opt_cfg)?;
    Ok(state)
}

/// Continues training from an existing state (for example a checkpoint).
/// `max_iterations` bounds the total step count, not the steps added here.
pub fn fit_from(
    state: &mut SelectionState,
    train: &Dataset,
    stats: &PreprocessStats,
    est_cfg: &EstimatorConfig,
    opt_cfg: &OptimizerConfig,
) -> Result<()> {
    opt_cfg.validate()?;
    let lambda = state.lambda;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let n = train.n_rows();
    let d = train.n_features();
    if n == 0 {
        return Err(Error::Data("empty training set".into()));
    }
    if state.v.len() != d || stats.means.len() != d {
        return Err(Error::Config(format!(
            "dimension mismatch: data has {d} features, state {} and stats {}",
            state.v.len(),
            stats.means.len()
        )));
    }
    state.stop_reason = None;
    // The last point was recorded without a following update; the loop
    // records it again.
    if state.trace.last().is_some_and(|p| p.step == state.step) {
        state.trace.pop();
    }

    match opt_cfg.mini_batch_size {
        Some(b) if b < n => fit_minibatch(state, train, stats, est_cfg, opt_cfg, b),
        _ => fit_full_batch(state, train, stats, est_cfg, opt_cfg),
    }
}

fn relative_change(current: f64, previous: f64) -> f64 {
    (current - previous).abs() / previous.abs().max(1e-12)
}

fn record(state: &mut SelectionState, objective: f64, penalty: f64, s: &[f64]) {
    state.trace.push(TracePoint {
        step: state.step,
        objective,
        penalty,
        mean_s: s.iter().sum::<f64>() / s.len().max(1) as f64,
    });
}

fn fit_full_batch(
    state: &mut SelectionState,
    train: &Dataset,
    stats: &PreprocessStats,
    est_cfg: &EstimatorConfig,
    opt_cfg: &OptimizerConfig,
) -> Result<()> {
    let x = transform_all(train, stats);
    let y = train.labels();
    let batch = BatchView::new(&x, y);
    let d = train.n_features();
    let mut previous = state.trace.last().map(|p| p.objective + p.penalty);

    loop {
        let s = squash(&state.v);
        let (f, grad_s) = objective_and_gradient(&batch, &s, est_cfg)?;
        let (penalty, grad_pen) = penalty_and_grad(&state.v, state.lambda, d);
        if !f.is_finite() {
            return Err(Error::NonFinite {
                step: state.step,
                detail: format!("objective evaluated to {f}"),
            });
        }
        record(state, f, penalty, &s);
        let total = f + penalty;
        if let Some(prev) = previous {
            if relative_change(total, prev) < opt_cfg.rel_tolerance {
                state.stop_reason = Some(StopReason::RelativeTolerance);
                return Ok(());
            }
        }
        previous = Some(total);
        if state.step >= opt_cfg.max_iterations {
            state.stop_reason = Some(StopReason::MaxIterations);
            return Ok(());
        }
        let mut grad_v = chain_gradient(&grad_s, &state.v);
        for (g, p) in grad_v.iter_mut().zip(&grad_pen) {
            *g += p;
        }
        adam_step(state, &grad_v, opt_cfg)?;
    }
}

fn fit_minibatch(
    state: &mut SelectionState,
    train: &Dataset,
    stats: &PreprocessStats,
    est_cfg: &EstimatorConfig,
    opt_cfg: &OptimizerConfig,
    batch_size: usize,
) -> Result<()> {
    let k = est_cfg.order();
    if batch_size < k + 1 {
        return Err(Error::Config(format!(
            "mini-batch size {batch_size} cannot support an order-{k} estimate (needs >= {})",
            k + 1
        )));
    }
    let n = train.n_rows();
    let d = train.n_features();
    let y_all = train.labels();
    let mut rng = StdRng::seed_from_u64(opt_cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut smoothed: Option<f64> = None;

    for _epoch in 0..opt_cfg.epochs {
        order.shuffle(&mut rng);
        // Trailing rows that cannot form a valid micro-batch are skipped.
        let chunks: Vec<&[usize]> = order.chunks(batch_size).filter(|c| c.len() > k).collect();
        let mut next = 0;
        while next < chunks.len() {
            if state.step >= opt_cfg.max_iterations {
                state.stop_reason = Some(StopReason::MaxIterations);
                return Ok(());
            }
            // Row-weighted average of micro-batch estimates; each
            // micro-batch uses its own size in the denominators.
            let s = squash(&state.v);
            let mut rows_seen = 0usize;
            let mut f_sum = 0.0;
            let mut grad_sum = vec![0.0; d];
            while next < chunks.len() && (rows_seen == 0 || rows_seen < opt_cfg.accumulation_target)
            {
                let rows = chunks[next];
                next += 1;
                let x = transform_batch(train, rows, stats);
                let y: Vec<f64> = rows.iter().map(|&i| y_all[i]).collect();
                let batch = BatchView::new(&x, &y);
                let (f, g) = objective_and_gradient(&batch, &s, est_cfg)?;
                let w = rows.len() as f64;
                f_sum += w * f;
                for (a, b) in grad_sum.iter_mut().zip(&g) {
                    *a += w * b;
                }
                rows_seen += rows.len();
            }
            let inv = 1.0 / rows_seen as f64;
            let f = f_sum * inv;
            grad_sum.iter_mut().for_each(|g| *g *= inv);
            if !f.is_finite() {
                return Err(Error::NonFinite {
                    step: state.step,
                    detail: format!("objective evaluated to {f}"),
                });
            }
            let (penalty, grad_pen) = penalty_and_grad(&state.v, state.lambda, d);
            record(state, f, penalty, &s);

            let total = f + penalty;
            let updated = match smoothed {
                None => total,
                Some(prev) => opt_cfg.ema_decay * prev + (1.0 - opt_cfg.ema_decay) * total,
            };
            if let Some(prev) = smoothed {
                if relative_change(updated, prev) < opt_cfg.rel_tolerance {
                    state.stop_reason = Some(StopReason::RelativeTolerance);
                    return Ok(());
                }
            }
            smoothed = Some(updated);

            let mut grad_v = chain_gradient(&grad_sum, &state.v);
            for (g, p) in grad_v.iter_mut().zip(&grad_pen) {
                *g += p;
            }
            adam_step(state, &grad_v, opt_cfg)?;
        }
    }
    state.stop_reason = Some(StopReason::EpochBudget);
    Ok(())
}

/// Writes the trace as CSV: `step,objective,penalty,mean_s`.
pub fn write_trace(state: &SelectionState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("step,objective,penalty,mean_s\n");
    for p in &state.trace {
        let _ = writeln!(out, "{},{},{},{}", p.step, p.objective, p.penalty, p.mean_s);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    v: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    step: usize,
    lambda: f64,
}

/// Saves `v`, the Adam moments, the step count and lambda as JSON.
pub fn save_checkpoint(state: &SelectionState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ck = Checkpoint {
        v: state.v.clone(),
        adam_m: state.adam_m.clone(),
        adam_v: state.adam_v.clone(),
        step: state.step,
        lambda: state.lambda,
    };
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer(&mut file, &ck)?;
    file.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SelectionState> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text)?;
    let d = ck.v.len();
    if ck.adam_m.len() != d || ck.adam_v.len() != d {
        return Err(Error::Data(format!(
            "{}: inconsistent checkpoint",
            path.display()
        )));
    }
    Ok(SelectionState {
        v: ck.v,
        adam_m: ck.adam_m,
        adam_v: ck.adam_v,
        step: ck.step,
        lambda: ck.lambda,
        trace: Vec::new(),
        stop_reason: None,
    })
}
