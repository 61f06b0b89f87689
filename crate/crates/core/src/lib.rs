//! Feature subset search by gradient descent on a residual-variance
//! estimator.
//!
//! The estimator scores a (relaxed) feature subset `s` by how much label
//! variance a linear model restricted to those features leaves unexplained.
//! Every power of the triangular operator it needs is applied in linear time
//! and memory, so the score and its gradient cost `O(N·D·k)` for `N` rows,
//! `D` features and order `k`.
//!
//! Modules:
//! - [`dataio`]: datasets, svmlight/CSV loaders, splits, synthetic data.
//! - [`preprocess`]: centering and spectral scaling.
//! - [`estimator`]: the objective and its gradient.
//! - [`optimizer`]: Adam over the squashed relaxation with an L1 penalty.
//! - [`selection`]: rankings, nested subsets and the lambda grid search.
//! - [`baselines`]: ANOVA F and binned mutual information filters.
//! - [`eval`]: logistic regression, AUC and paired t-tests.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dataio;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod linalg;
pub mod matrix;
pub mod optimizer;
pub mod preprocess;
pub mod selection;

pub use error::{Error, Result};
pub use matrix::Matrix;
