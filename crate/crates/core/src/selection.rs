//! From scores to subsets: ranking, nested top-m subsets, shared ranking
//! file format, and the validation grid search over lambda.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::eval::{subset_auc, LogRegConfig};
use crate::optimizer::{fit, OptimizerConfig, SelectionState};
use crate::preprocess::PreprocessStats;

pub const DEFAULT_LAMBDA_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// Reports list every score only up to this many features.
pub const REPORT_SCORE_LIMIT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub scores: Vec<f64>,
    pub ranking: Vec<usize>,
    pub subsets: BTreeMap<usize, Vec<usize>>,
    pub lambda_used: Option<f64>,
}

/// Indices by descending score; ties go to the smaller index. NaN sorts
/// last.
pub fn rank_indices(scores: &[f64]) -> Vec<usize> {
    let key = |x: f64| if x.is_nan() { f64::NEG_INFINITY } else { x };
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| key(scores[b]).total_cmp(&key(scores[a])).then(a.cmp(&b)));
    idx
}

/// Ranking plus the top-`m` subset for each requested size (capped at D).
pub fn rank_scores(scores: Vec<f64>, sizes: &[usize], lambda_used: Option<f64>) -> SelectionResult {
    let ranking = rank_indices(&scores);
    let subsets = sizes
        .iter()
        .map(|&m| {
            let m = m.min(ranking.len());
            (m, ranking[..m].to_vec())
        })
        .collect();
    SelectionResult {
        scores,
        ranking,
        subsets,
        lambda_used,
    }
}

/// Ranks a trained state by its scores `σ(2v)`.
pub fn rank_features(state: &SelectionState, sizes: &[usize]) -> SelectionResult {
    rank_scores(state.scores(), sizes, Some(state.lambda))
}

#[derive(Serialize)]
struct Report<'a> {
    selector: &'a str,
    n_features: usize,
    lambda_used: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<&'a [f64]>,
    ranking_head: &'a [usize],
    subsets: &'a BTreeMap<usize, Vec<usize>>,
}

impl SelectionResult {
    /// JSON report; scores are omitted above [`REPORT_SCORE_LIMIT`] features.
    pub fn to_report_json(&self, selector: &str) -> Result<String> {
        let d = self.scores.len();
        let report = Report {
            selector,
            n_features: d,
            lambda_used: self.lambda_used,
            scores: (d <= REPORT_SCORE_LIMIT).then_some(&self.scores[..]),
            ranking_head: &self.ranking[..d.min(1000)],
            subsets: &self.subsets,
        };
        Ok(serde_json::to_string_pretty(&report)?)
    }

    pub fn write_report(&self, selector: &str, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_report_json(selector)?).map_err(|e| Error::io(path, e))
    }

    /// One line per subset size: `m: i1 i2 ...`.
    pub fn write_subsets(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for (m, idx) in &self.subsets {
            let _ = write!(out, "{m}:");
            for i in idx {
                let _ = write!(out, " {i}");
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Ranking file: `#` comment lines, then one 0-based feature index per
/// line, best first.
pub fn write_ranking(
    ranking: &[usize],
    selector: &str,
    n_features: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("# selector: {selector}\n# n_features: {n_features}\n");
    for i in ranking {
        let _ = writeln!(out, "{i}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_ranking(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seen = std::collections::HashSet::new();
    let mut ranking = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let idx: usize = line.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: format!("expected a feature index, got {line:?}"),
        })?;
        if !seen.insert(idx) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("feature {idx} ranked twice"),
            });
        }
        ranking.push(idx);
    }
    Ok(ranking)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEvaluation {
    pub lambda: f64,
    pub mean_auc: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub best_lambda: f64,
    pub result: SelectionResult,
    pub state: SelectionState,
    pub evaluations: Vec<LambdaEvaluation>,
}

/// Removes repeated values, keeping first occurrences in order.
pub fn dedup_lambdas(lambdas: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

/// Fits one selection per lambda and keeps the one whose top-`m` subsets
/// give the best mean validation AUC over `target_sizes`. Ties go to the
/// smaller lambda. Fits run in parallel; results are merged in grid order.
#[allow(clippy::too_many_arguments)]
pub fn grid_search_lambda(
    train: &Dataset,
    validation: &Dataset,
    stats: &PreprocessStats,
    lambdas: &[f64],
    target_sizes: &[usize],
    est_cfg: &EstimatorConfig,
    opt_cfg: &OptimizerConfig,
    logreg: &LogRegConfig,
) -> Result<GridSearch> {
    let grid = dedup_lambdas(lambdas);
    if grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::Config(format!(
            "lambda {bad} must be finite and >= 0"
        )));
    }
    if validation.n_rows() == 0 {
        return Err(Error::Config("validation set is empty".into()));
    }
    if target_sizes.is_empty() || target_sizes.contains(&0) {
        return Err(Error::Config(
            "target sizes must be nonempty and positive".into(),
        ));
    }

    let outcomes: Vec<Result<(SelectionState, SelectionResult, f64)>> = grid
        .par_iter()
        .map(|&lambda| {
            let state = fit(train, stats, est_cfg, opt_cfg, lambda)?;
            let result = rank_features(&state, target_sizes);
            let mut total = 0.0;
            for subset in result.subsets.values() {
                total += subset_auc(subset, train, validation, logreg)?;
            }
            let mean = total / result.subsets.len() as f64;
            if !mean.is_finite() {
                return Err(Error::NonFinite {
                    step: state.step,
                    detail: format!("validation AUC {mean}"),
                });
            }
            Ok((state, result, mean))
        })
        .collect();

    let mut evaluations = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64, SelectionState, SelectionResult)> = None;
    for (&lambda, outcome) in grid.iter().zip(outcomes) {
        match outcome {
            Ok((state, result, mean)) => {
                evaluations.push(LambdaEvaluation {
                    lambda,
                    mean_auc: Some(mean),
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((best_auc, best_lambda, ..)) => {
                        mean > *best_auc || (mean == *best_auc && lambda < *best_lambda)
                    }
                };
                if better {
                    best = Some((mean, lambda, state, result));
                }
            }
            Err(e) => evaluations.push(LambdaEvaluation {
                lambda,
                mean_auc: None,
                error: Some(e.to_string()),
            }),
        }
    }
    match best {
        Some((_, best_lambda, state, result)) => Ok(GridSearch {
            best_lambda,
            result,
            state,
            evaluations,
        }),
        None => {
            let mut detail = String::from("every lambda failed:");
            for e in &evaluations {
                let _ = write!(
                    detail,
                    " [{}: {}]",
                    e.lambda,
                    e.error.as_deref().unwrap_or("?")
                );
            }
            Err(Error::Degenerate(detail))
        }
    }
}
