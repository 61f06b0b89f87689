use rand::rngs::StdRng;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Fractions for a train / validation / test split; test takes the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, validation_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            train_fraction,
            validation_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (t, v) = (self.train_fraction, self.validation_fraction);
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Config(format!("train fraction {t} not in (0, 1)")));
        }
        if !(0.0..1.0).contains(&v) {
            return Err(Error::Config(format!(
                "validation fraction {v} not in [0, 1)"
            )));
        }
        if t + v >= 1.0 {
            return Err(Error::Config(format!(
                "train + validation fractions ({}) leave no test rows",
                t + v
            )));
        }
        Ok(())
    }
}

/// Stratified shuffle split into (train, validation, test).
///
/// Rows of each class are shuffled and spread evenly along one combined
/// order, so every prefix of that order has close to the overall class
/// ratio. The three parts are consecutive slices of it; each part keeps the
/// original row order.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let n = ds.n_rows();
    if n < 3 {
        return Err(Error::Config(format!("cannot split {n} rows")));
    }
    let mut rng = StdRng::seed_from_u64(spec.seed);

    let (mut neg, mut pos): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| ds.labels()[i] < 0.0);
    neg.shuffle(&mut rng);
    pos.shuffle(&mut rng);

    let mut keyed: Vec<(f64, u64, usize)> = Vec::with_capacity(n);
    for class in [&neg, &pos] {
        let m = class.len() as f64;
        for (j, &row) in class.iter().enumerate() {
            keyed.push(((j as f64 + 0.5) / m, rng.random(), row));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let order: Vec<usize> = keyed.into_iter().map(|(_, _, row)| row).collect();

    let n_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let n_val = ((spec.validation_fraction * n as f64).round() as usize).min(n - n_train - 1);

    let part = |range: &[usize]| {
        let mut rows = range.to_vec();
        rows.sort_unstable();
        ds.select_rows(&rows)
    };
    Ok((
        part(&order[..n_train]),
        part(&order[n_train..n_train + n_val]),
        part(&order[n_train + n_val..]),
    ))
}

/// Draws `min(m, n_rows)` distinct rows in random order.
pub fn subsample(ds: &Dataset, m: usize, seed: u64) -> Dataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = ds.n_rows();
    let rows = index::sample(&mut rng, n, m.min(n)).into_vec();
    ds.select_rows(&rows)
}
