//! CSV ingestion and emission for feature matrices and node labels.
//!
//! Features: one row per node, one numeric column per feature, optional
//! header. Labels: `node_id,class` rows with ids `0..N` each exactly once
//! and classes in {0, 1}, optional header. Reals are written in Rust's
//! shortest round-trip form, so a write/read cycle is bit-exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::Dataset;
use crate::matrix::Matrix;
use crate::training::LabelSet;

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn records(path: &Path) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut out = Vec::new();
    for (i, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn is_header(rec: &csv::StringRecord) -> bool {
    rec.iter().any(|f| f.parse::<f64>().is_err())
}

/// Reads an N x M feature matrix. Error positions are 1-based file rows
/// and columns.
pub fn read_features(path: &Path) -> Result<Matrix> {
    let mut rows = records(path)?;
    if rows.first().is_some_and(|(_, r)| is_header(r)) {
        rows.remove(0);
    }
    let Some((_, first)) = rows.first() else {
        return Err(Error::Dataset(format!("{}: no feature rows", path.display())));
    };
    let cols = first.len();
    let mut data = Vec::with_capacity(rows.len() * cols);
    for (line, rec) in &rows {
        if rec.len() != cols {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: *line,
                column: rec.len().min(cols) + 1,
                message: format!("expected {cols} columns, found {}", rec.len()),
            });
        }
        for (c, field) in rec.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: *line,
                column: c + 1,
                message: if field.is_empty() {
                    "missing value".into()
                } else {
                    format!("`{field}` is not a number")
                },
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: *line,
                    column: c + 1,
                    message: format!("`{field}` is not finite"),
                });
            }
            data.push(value);
        }
    }
    Matrix::new(rows.len(), cols, data)
}

/// Reads `node_id,class` rows into a fully labeled [`LabelSet`] ordered by id.
pub fn read_labels(path: &Path) -> Result<LabelSet> {
    let mut rows = records(path)?;
    if rows.first().is_some_and(|(_, r)| is_header(r)) {
        rows.remove(0);
    }
    let n = rows.len();
    let mut classes: Vec<Option<usize>> = vec![None; n];
    for (line, rec) in &rows {
        let err = |column: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            row: *line,
            column,
            message,
        };
        if rec.len() != 2 {
            return Err(err(1, format!("expected 2 columns, found {}", rec.len())));
        }
        let id: usize = rec[0]
            .parse()
            .map_err(|_| err(1, format!("`{}` is not a node id", &rec[0])))?;
        let class: usize = match &rec[1] {
            "0" => 0,
            "1" => 1,
            other => return Err(err(2, format!("class must be 0 or 1, got `{other}`"))),
        };
        if id >= n {
            return Err(err(1, format!("node id {id} out of range 0..{n}")));
        }
        if classes[id].replace(class).is_some() {
            return Err(err(1, format!("node id {id} appears twice")));
        }
    }
    if n == 0 {
        return Err(Error::Dataset(format!("{}: no label rows", path.display())));
    }
    let labels = classes.into_iter().map(|c| c.expect("ids form 0..n")).collect();
    Ok(LabelSet::fully_labeled(labels))
}

pub fn load_dataset(features: &Path, labels: &Path) -> Result<Dataset> {
    let f = read_features(features)?;
    let l = read_labels(labels)?;
    if f.rows() != l.len() {
        return Err(Error::Dataset(format!(
            "{} has {} rows but {} has {}",
            features.display(),
            f.rows(),
            labels.display(),
            l.len()
        )));
    }
    Ok(Dataset {
        features: f,
        labels: l,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Writes features without a header.
pub fn write_features(path: &Path, features: &Matrix) -> Result<()> {
    let mut w = create(path)?;
    let mut line = String::new();
    for r in 0..features.rows() {
        line.clear();
        for (c, v) in features.row(r).iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_labels(path: &Path, labels: &LabelSet) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "node_id,class").map_err(|e| Error::io(path, e))?;
    for (i, c) in labels.labels().iter().enumerate() {
        writeln!(w, "{i},{c}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
