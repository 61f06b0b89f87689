//! Datasets and the ways to get them: svmlight and CSV loaders, stratified
//! splits, subsampling, and a synthetic generator with known support.

mod split;
mod svmlight;
mod synth;
mod tabular;

pub use split::{split, subsample, SplitSpec};
pub use svmlight::{load_svmlight, parse_svmlight, write_svmlight};
pub use synth::{generate_synthetic, SynthSpec};
pub use tabular::{load_csv, parse_csv, write_csv};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Feature storage, row-major in both layouts.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense {
        values: Vec<f64>,
    },
    /// CSR layout; `indptr` has `n_rows + 1` entries.
    Sparse {
        indptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
    },
}

/// A binary classification dataset with labels in {-1, +1}.
///
/// Immutable once built; every constructor validates the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    n_features: usize,
    features: Features,
    labels: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum RowView<'a> {
    Dense(&'a [f64]),
    Sparse {
        indices: &'a [u32],
        values: &'a [f64],
    },
}

impl<'a> RowView<'a> {
    /// Iterates stored `(feature, value)` pairs. Dense rows yield every
    /// column, including zeros.
    pub fn iter(&self) -> RowIter<'a> {
        match *self {
            RowView::Dense(v) => RowIter::Dense(v.iter().enumerate()),
            RowView::Sparse { indices, values } => {
                RowIter::Sparse(indices.iter().zip(values.iter()))
            }
        }
    }

    pub fn to_dense(&self, n_features: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_features];
        self.scatter_into(&mut out);
        out
    }

    /// Writes this row's values into `out`, which must already be zeroed at
    /// the positions a sparse row does not store.
    pub fn scatter_into(&self, out: &mut [f64]) {
        match *self {
            RowView::Dense(v) => out.copy_from_slice(v),
            RowView::Sparse { indices, values } => {
                for (&j, &x) in indices.iter().zip(values) {
                    out[j as usize] = x;
                }
            }
        }
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.iter().map(|(j, x)| x * w[j]).sum()
    }
}

pub enum RowIter<'a> {
    Dense(std::iter::Enumerate<std::slice::Iter<'a, f64>>),
    Sparse(std::iter::Zip<std::slice::Iter<'a, u32>, std::slice::Iter<'a, f64>>),
}

impl Iterator for RowIter<'_> {
    type Item = (usize, f64);

    #[inline]
    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            RowIter::Dense(it) => it.next().map(|(j, &x)| (j, x)),
            RowIter::Sparse(it) => it.next().map(|(&j, &x)| (j as usize, x)),
        }
    }
}

/// Maps any raw target to {-1, +1}: positive values become +1.
pub fn binarize_label(raw: f64) -> f64 {
    if raw > 0.0 {
        1.0
    } else {
        -1.0
    }
}

impl Dataset {
    pub fn dense(name: impl Into<String>, x: Matrix, labels: Vec<f64>) -> Result<Self> {
        let n_features = x.cols();
        if x.rows() != labels.len() {
            return Err(Error::Data(format!(
                "{} rows but {} labels",
                x.rows(),
                labels.len()
            )));
        }
        let ds = Dataset {
            name: name.into(),
            n_features,
            features: Features::Dense {
                values: x.into_vec(),
            },
            labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Builds a sparse dataset from per-row `(index, value)` lists. Indices
    /// must be strictly increasing within each row.
    pub fn sparse(
        name: impl Into<String>,
        n_features: usize,
        rows: Vec<Vec<(u32, f64)>>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for row in rows {
            for (j, x) in row {
                indices.push(j);
                values.push(x);
            }
            indptr.push(indices.len());
        }
        let ds = Dataset {
            name: name.into(),
            n_features,
            features: Features::Sparse {
                indptr,
                indices,
                values,
            },
            labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if let Some(bad) = self.labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::Data(format!("label {bad} is not -1 or +1")));
        }
        match &self.features {
            Features::Dense { values } => {
                if values.len() != self.labels.len() * self.n_features {
                    return Err(Error::Data("dense storage size mismatch".into()));
                }
            }
            Features::Sparse {
                indptr, indices, ..
            } => {
                if indptr.len() != self.labels.len() + 1 {
                    return Err(Error::Data("row pointer length mismatch".into()));
                }
                for (i, w) in indptr.windows(2).enumerate() {
                    let row = &indices[w[0]..w[1]];
                    if row.windows(2).any(|p| p[0] >= p[1]) {
                        return Err(Error::Data(format!(
                            "row {i}: feature indices not strictly increasing"
                        )));
                    }
                    if let Some(&last) = row.last() {
                        if last as usize >= self.n_features {
                            return Err(Error::Data(format!(
                                "row {i}: feature index {last} out of range for D={}",
                                self.n_features
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.features, Features::Sparse { .. })
    }

    #[inline]
    pub fn row(&self, i: usize) -> RowView<'_> {
        match &self.features {
            Features::Dense { values } => {
                RowView::Dense(&values[i * self.n_features..(i + 1) * self.n_features])
            }
            Features::Sparse {
                indptr,
                indices,
                values,
            } => {
                let (a, b) = (indptr[i], indptr[i + 1]);
                RowView::Sparse {
                    indices: &indices[a..b],
                    values: &values[a..b],
                }
            }
        }
    }

    /// Counts of (negative, positive) labels.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y > 0.0).count();
        (self.labels.len() - pos, pos)
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let (neg, pos) = self.class_counts();
        if neg == 0 || pos == 0 {
            return Err(Error::SingleClass);
        }
        Ok(())
    }

    /// New dataset holding the given rows, in the given order, in the same
    /// storage layout.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        let features = match &self.features {
            Features::Dense { values } => {
                let d = self.n_features;
                let mut out = Vec::with_capacity(rows.len() * d);
                for &i in rows {
                    out.extend_from_slice(&values[i * d..(i + 1) * d]);
                }
                Features::Dense { values: out }
            }
            Features::Sparse {
                indptr,
                indices,
                values,
            } => {
                let mut new_ptr = Vec::with_capacity(rows.len() + 1);
                let mut new_idx = Vec::new();
                let mut new_val = Vec::new();
                new_ptr.push(0);
                for &i in rows {
                    new_idx.extend_from_slice(&indices[indptr[i]..indptr[i + 1]]);
                    new_val.extend_from_slice(&values[indptr[i]..indptr[i + 1]]);
                    new_ptr.push(new_idx.len());
                }
                Features::Sparse {
                    indptr: new_ptr,
                    indices: new_idx,
                    values: new_val,
                }
            }
        };
        Dataset {
            name: self.name.clone(),
            n_features: self.n_features,
            features,
            labels,
        }
    }

    /// Dense `n_rows × cols.len()` copy of the listed columns.
    pub fn columns_dense(&self, cols: &[usize]) -> Result<Matrix> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n_features) {
            return Err(Error::Config(format!(
                "feature {bad} out of range for D={}",
                self.n_features
            )));
        }
        let mut out = Matrix::zeros(self.n_rows(), cols.len());
        match &self.features {
            Features::Dense { .. } => {
                for i in 0..self.n_rows() {
                    let RowView::Dense(src) = self.row(i) else {
                        unreachable!()
                    };
                    for (dst, &c) in out.row_mut(i).iter_mut().zip(cols) {
                        *dst = src[c];
                    }
                }
            }
            Features::Sparse { .. } => {
                let mut position = vec![usize::MAX; self.n_features];
                for (p, &c) in cols.iter().enumerate() {
                    position[c] = p;
                }
                for i in 0..self.n_rows() {
                    let dst = out.row_mut(i);
                    for (j, x) in self.row(i).iter() {
                        let p = position[j];
                        if p != usize::MAX {
                            dst[p] = x;
                        }
                    }
                }
                // Duplicate entries in `cols` only got the last position.
                for (p, &c) in cols.iter().enumerate() {
                    if position[c] != p {
                        let src = position[c];
                        for i in 0..self.n_rows() {
                            let v = out.get(i, src);
                            out.set(i, p, v);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.n_rows(), self.n_features);
        for i in 0..self.n_rows() {
            self.row(i).scatter_into(out.row_mut(i));
        }
        out
    }

    /// Same rows, labels and values with dense storage.
    pub fn densified(&self) -> Dataset {
        Dataset {
            name: self.name.clone(),
            n_features: self.n_features,
            features: Features::Dense {
                values: self.to_dense().into_vec(),
            },
            labels: self.labels.clone(),
        }
    }

    /// Same rows, labels and values with sparse storage (zeros dropped).
    pub fn sparsified(&self) -> Dataset {
        let rows = (0..self.n_rows())
            .map(|i| {
                self.row(i)
                    .iter()
                    .filter(|&(_, x)| x != 0.0)
                    .map(|(j, x)| (j as u32, x))
                    .collect()
            })
            .collect();
        Dataset::sparse(
            self.name.clone(),
            self.n_features,
            rows,
            self.labels.clone(),
        )
        .expect("re-encoding a valid dataset")
    }

    /// True when both datasets hold the same labels and the same values at
    /// every position, regardless of storage layout.
    pub fn same_content(&self, other: &Dataset) -> bool {
        self.n_features == other.n_features
            && self.labels == other.labels
            && self.to_dense() == other.to_dense()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_labels() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        assert!(Dataset::dense("t", x, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn rejects_unsorted_sparse_rows() {
        let rows = vec![vec![(2, 1.0), (1, 1.0)]];
        assert!(Dataset::sparse("t", 3, rows, vec![1.0]).is_err());
        let rows = vec![vec![(3, 1.0)]];
        assert!(Dataset::sparse("t", 3, rows, vec![1.0]).is_err());
    }

    #[test]
    fn columns_dense_matches_between_layouts() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0]]);
        let ds = Dataset::dense("t", x, vec![1.0, -1.0]).unwrap();
        let sp = ds.sparsified();
        let cols = [2, 0, 2];
        assert_eq!(
            ds.columns_dense(&cols).unwrap(),
            sp.columns_dense(&cols).unwrap()
        );
        assert!(ds.same_content(&sp));
    }
}
