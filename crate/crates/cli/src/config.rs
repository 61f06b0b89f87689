//! Resolved run configuration for `select`, written next to the outputs so
//! a run can be replayed exactly.

use std::fs;
use std::path::{Path, PathBuf};

use featgrad::estimator::{DenominatorPolicy, EstimatorConfig, Execution};
use featgrad::eval::LogRegConfig;
use featgrad::optimizer::OptimizerConfig;
use featgrad::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub path: PathBuf,
    /// Label column for CSV input; ignored for svmlight.
    pub label_column: usize,
    /// Feature count hint for svmlight input.
    pub n_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub train: DataSource,
    pub validation: Option<DataSource>,
    /// Share of the training file held out for validation when no
    /// validation file is given and the grid has more than one lambda.
    pub validation_fraction: f64,
    pub estimator: EstimatorConfig,
    pub optimizer: OptimizerConfig,
    pub logreg: LogRegConfig,
    pub lambdas: Vec<f64>,
    pub sizes: Vec<usize>,
    pub subsample_stats: Option<usize>,
    pub resume: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    command: String,
    digest: String,
    config: SelectConfig,
}

impl SelectConfig {
    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ConfigFile {
            command: "select".into(),
            digest: self.digest(),
            config: self.clone(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    /// Loads a saved config and checks its digest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let file: ConfigFile = serde_json::from_str(&text)?;
        if file.command != "select" {
            return Err(Error::Config(format!(
                "{}: config was written by `{}`, not `select`",
                path.display(),
                file.command
            )));
        }
        if file.config.digest() != file.digest {
            return Err(Error::Config(format!(
                "{}: digest mismatch, the config was edited after it was written",
                path.display()
            )));
        }
        Ok(file.config)
    }
}

pub fn parse_execution(parallel: bool) -> Execution {
    if parallel {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

/// `exact` or `capped:<n>`.
pub fn parse_denominator(text: &str) -> Result<DenominatorPolicy> {
    if text == "exact" {
        return Ok(DenominatorPolicy::ExactBinomialLog);
    }
    text.strip_prefix("capped:")
        .and_then(|n| n.parse().ok())
        .map(DenominatorPolicy::Capped)
        .ok_or_else(|| {
            Error::Config(format!(
                "--denominator: expected `exact` or `capped:<n>`, got {text:?}"
            ))
        })
}
