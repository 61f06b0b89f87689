//! svmlight / libsvm text format: `<label> <index>:<value> ...` with 1-based
//! feature indices. `#` starts a comment; `qid:` tokens are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{binarize_label, Dataset};
use crate::error::{Error, Result};

pub fn load_svmlight(path: impl AsRef<Path>, d_hint: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_svmlight(BufReader::new(file), path, d_hint).map(|ds| ds.with_name(name))
}

/// Parses svmlight text from any reader. `source` only labels error messages.
pub fn parse_svmlight<R: BufRead>(
    reader: R,
    source: impl AsRef<Path>,
    d_hint: Option<usize>,
) -> Result<Dataset> {
    let source = source.as_ref();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        message,
    };

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let content = match line.find('#') {
            Some(p) => &line[..p],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let raw: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad label {label_tok:?}")))?;
        if !raw.is_finite() {
            return Err(parse_err(lineno, format!("bad label {label_tok:?}")));
        }

        let mut row: Vec<(u32, f64)> = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected index:value, got {tok:?}")))?;
            if idx == "qid" {
                continue;
            }
            let idx: i64 = idx
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature index {idx:?}")))?;
            if idx <= 0 {
                return Err(parse_err(
                    lineno,
                    format!("feature index {idx} must be >= 1"),
                ));
            }
            if idx > u32::MAX as i64 {
                return Err(parse_err(lineno, format!("feature index {idx} too large")));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature value {val:?}")))?;
            if !val.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value {val}")));
            }
            row.push(((idx - 1) as u32, val));
        }
        row.sort_by_key(|&(j, _)| j);
        if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(parse_err(
                lineno,
                format!("duplicate feature index {}", w[0].0 + 1),
            ));
        }
        if let Some(&(j, _)) = row.last() {
            max_index = max_index.max(j as usize + 1);
        }
        rows.push(row);
        labels.push(binarize_label(raw));
    }

    let n_features = max_index.max(d_hint.unwrap_or(0));
    Dataset::sparse(String::new(), n_features, rows, labels)
}

/// Writes a dataset in svmlight format. Zeros are not stored; values are
/// printed in shortest round-trip form, so reloading is exact.
pub fn write_svmlight(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_rows(ds, &mut w).map_err(|e| Error::io(path, e))
}

fn write_rows<W: Write>(ds: &Dataset, w: &mut W) -> std::io::Result<()> {
    for i in 0..ds.n_rows() {
        let label = if ds.labels()[i] > 0.0 { "+1" } else { "-1" };
        write!(w, "{label}")?;
        for (j, x) in ds.row(i).iter() {
            if x != 0.0 {
                write!(w, " {}:{}", j + 1, x)?;
            }
        }
        writeln!(w)?;
    }
    w.flush()
}
