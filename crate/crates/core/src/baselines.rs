//! Univariate filter scores: one-way ANOVA F and binned mutual information.
//! Both work on sparse rows without densifying; implicit zeros are counted.

use crate::dataio::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_MI_BINS: usize = 16;

/// Per-class running sums for each feature.
struct ClassSums {
    count: [usize; 2],
    sum: Vec<[f64; 2]>,
    sumsq: Vec<[f64; 2]>,
}

fn class_index(label: f64) -> usize {
    usize::from(label > 0.0)
}

fn class_sums(ds: &Dataset) -> ClassSums {
    let d = ds.n_features();
    let mut out = ClassSums {
        count: [0, 0],
        sum: vec![[0.0; 2]; d],
        sumsq: vec![[0.0; 2]; d],
    };
    for i in 0..ds.n_rows() {
        let c = class_index(ds.labels()[i]);
        out.count[c] += 1;
        for (j, x) in ds.row(i).iter() {
            out.sum[j][c] += x;
            out.sumsq[j][c] += x * x;
        }
    }
    out
}

/// One-way ANOVA F statistic of each feature against the two classes.
///
/// `F = (SSB / 1) / (SSW / (n − 2))`. Zero within-class spread with nonzero
/// between-class spread scores `+∞`; a constant feature scores 0.
pub fn anova_f_scores(ds: &Dataset) -> Result<Vec<f64>> {
    ds.require_both_classes()?;
    let n = ds.n_rows();
    let sums = class_sums(ds);
    let counts = [sums.count[0] as f64, sums.count[1] as f64];
    let df_within = n.saturating_sub(2) as f64;

    let scores = (0..ds.n_features())
        .map(|j| {
            let [s0, s1] = sums.sum[j];
            let [q0, q1] = sums.sumsq[j];
            let m0 = s0 / counts[0];
            let m1 = s1 / counts[1];
            let grand = (s0 + s1) / n as f64;
            let ssb = counts[0] * (m0 - grand).powi(2) + counts[1] * (m1 - grand).powi(2);
            let ssw = ((q0 - s0 * m0) + (q1 - s1 * m1)).max(0.0);
            // Treat spread at rounding level of the raw squares as zero.
            let zero_level = 1e-12 * (q0 + q1);
            let ssw = if ssw <= zero_level { 0.0 } else { ssw };
            let ssb = if ssb <= zero_level { 0.0 } else { ssb };
            match (ssb > 0.0, ssw > 0.0) {
                (false, _) => 0.0,
                (true, false) => f64::INFINITY,
                (true, true) => {
                    if df_within == 0.0 {
                        f64::INFINITY
                    } else {
                        ssb / (ssw / df_within)
                    }
                }
            }
        })
        .collect();
    Ok(scores)
}

/// Mutual information (natural log) between each feature, cut into
/// `n_bins` equal-width bins over its observed range, and the label.
pub fn mutual_info_scores(ds: &Dataset, n_bins: usize) -> Result<Vec<f64>> {
    ds.require_both_classes()?;
    if n_bins == 0 {
        return Err(Error::Config("number of bins must be >= 1".into()));
    }
    let n = ds.n_rows();
    let d = ds.n_features();

    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut stored = vec![[0usize; 2]; d];
    let mut class_count = [0usize; 2];
    for i in 0..n {
        let c = class_index(ds.labels()[i]);
        class_count[c] += 1;
        for (j, x) in ds.row(i).iter() {
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
            stored[j][c] += 1;
        }
    }
    // Features with unstored entries also take the value 0.
    for j in 0..d {
        if stored[j][0] + stored[j][1] < n {
            lo[j] = lo[j].min(0.0);
            hi[j] = hi[j].max(0.0);
        }
    }

    let bin_of = |j: usize, x: f64| -> usize {
        let width = hi[j] - lo[j];
        if !(width > 0.0) {
            return 0;
        }
        let b = ((x - lo[j]) / width * n_bins as f64).floor();
        (b.max(0.0) as usize).min(n_bins - 1)
    };

    let mut joint = vec![[0usize; 2]; d * n_bins];
    for i in 0..n {
        let c = class_index(ds.labels()[i]);
        for (j, x) in ds.row(i).iter() {
            joint[j * n_bins + bin_of(j, x)][c] += 1;
        }
    }
    for j in 0..d {
        let zero_bin = bin_of(j, 0.0);
        for c in 0..2 {
            joint[j * n_bins + zero_bin][c] += class_count[c] - stored[j][c];
        }
    }

    let total = n as f64;
    let pc = [class_count[0] as f64 / total, class_count[1] as f64 / total];
    let scores = (0..d)
        .map(|j| {
            let mut mi = 0.0;
            for cell in &joint[j * n_bins..(j + 1) * n_bins] {
                let nb = (cell[0] + cell[1]) as f64;
                if nb == 0.0 {
                    continue;
                }
                let pb = nb / total;
                for c in 0..2 {
                    if cell[c] > 0 {
                        let p = cell[c] as f64 / total;
                        mi += p * (p / (pb * pc[c])).ln();
                    }
                }
            }
            mi.max(0.0)
        })
        .collect();
    Ok(scores)
}
