//! CSV with a header row. One column holds the label; every other column
//! is a feature, in file order.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{binarize_label, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub fn load_csv(path: impl AsRef<Path>, label_column: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(file, path, label_column).map(|ds| ds.with_name(name))
}

pub fn parse_csv<R: Read>(
    reader: R,
    source: impl AsRef<Path>,
    label_column: usize,
) -> Result<Dataset> {
    let source = source.as_ref();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        message,
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .len();
    if label_column >= width {
        return Err(Error::Config(format!(
            "label column {label_column} out of range for {width} columns"
        )));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            let x: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric cell {cell:?} in column {c}")))?;
            if !x.is_finite() {
                return Err(parse_err(line, format!("non-finite cell in column {c}")));
            }
            if c == label_column {
                labels.push(binarize_label(x));
            } else {
                values.push(x);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let x = Matrix::from_vec(labels.len(), width - 1, values);
    Dataset::dense(String::new(), x, labels)
}

/// Writes the dataset densely with the label in column 0.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let to_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    let mut header = vec!["label".to_string()];
    header.extend((0..ds.n_features()).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(to_err)?;
    let mut dense = vec![0.0; ds.n_features()];
    for i in 0..ds.n_rows() {
        dense.iter_mut().for_each(|x| *x = 0.0);
        ds.row(i).scatter_into(&mut dense);
        let mut rec = vec![format!("{}", ds.labels()[i])];
        rec.extend(dense.iter().map(|x| format!("{x}")));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
