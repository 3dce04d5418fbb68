//! Labeled datasets and their CSV representation.
//!
//! CSV dialect: comma separated, UTF-8, one header row of feature names and
//! an optional final column named `label` holding `0` or `1`. Values are
//! written with Rust's shortest round-trip float formatting.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub name: String,
    pub feature_names: Vec<String>,
    values: Vec<f64>,
    labels: Vec<u8>,
}

impl LabeledDataset {
    /// Builds a dataset from row-major values.
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        values: Vec<f64>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if d == 0 {
            return Err(Error::Dimension("dataset needs at least one feature".into()));
        }
        if values.len() != d * labels.len() {
            return Err(Error::Dimension(format!(
                "{} values do not form {} rows of {d} features",
                values.len(),
                labels.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { column: i % d });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Parse(format!("label must be 0 or 1, got {bad}")));
        }
        Ok(Self {
            name: name.into(),
            feature_names,
            values,
            labels,
        })
    }

    /// Rows of `matrix` become samples; features are named `x0, x1, …`.
    pub fn from_matrix(name: impl Into<String>, matrix: &DMatrix<f64>, labels: Vec<u8>) -> Result<Self> {
        let (m, d) = matrix.shape();
        if labels.len() != m {
            return Err(Error::Dimension(format!(
                "{} labels for {m} rows",
                labels.len()
            )));
        }
        let mut values = Vec::with_capacity(m * d);
        for row in matrix.row_iter() {
            values.extend(row.iter().copied());
        }
        Self::new(name, default_feature_names(d), values, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_features())
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_anomalies(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Fraction of rows labeled anomalous.
    pub fn contamination(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.n_anomalies() as f64 / self.n_rows() as f64
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows(), self.n_features(), &self.values)
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.n_features());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            values,
            labels,
        }
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = std::fs::File::open(path)?;
        let mut ds = Self::from_reader(file)?;
        ds.name = name;
        Ok(ds)
    }

    /// Reads a labeled CSV; fails if the `label` column is missing.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rows = CsvRows::new(reader)?;
        if !rows.has_labels() {
            return Err(Error::Parse(format!(
                "missing final `{LABEL_COLUMN}` column"
            )));
        }
        let feature_names = rows.feature_names().to_vec();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for row in &mut rows {
            let row = row?;
            values.extend_from_slice(&row.values);
            labels.push(row.label.unwrap_or(0));
        }
        Self::new(String::new(), feature_names, values, labels)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(LABEL_COLUMN);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.n_features() + 1);
        for (row, label) in self.rows().zip(&self.labels) {
            record.clear();
            record.extend(row.iter().map(|v| v.to_string()));
            record.push(label.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn default_feature_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    /// Zero-based data row index (header excluded).
    pub index: usize,
    pub values: Vec<f64>,
    pub label: Option<u8>,
}

/// Row-by-row CSV reader with bounded memory.
pub struct CsvRows<R: Read> {
    reader: csv::Reader<R>,
    feature_names: Vec<String>,
    has_labels: bool,
    record: csv::StringRecord,
    index: usize,
}

impl<R: Read> CsvRows<R> {
    pub fn new(reader: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = reader.headers()?.clone();
        let mut names: Vec<String> = headers.iter().map(str::to_owned).collect();
        let has_labels = names.last().map(|n| n == LABEL_COLUMN).unwrap_or(false);
        if has_labels {
            names.pop();
        }
        if names.is_empty() {
            return Err(Error::Parse("CSV header has no feature columns".into()));
        }
        Ok(Self {
            reader,
            feature_names: names,
            has_labels,
            record: csv::StringRecord::new(),
            index: 0,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn has_labels(&self) -> bool {
        self.has_labels
    }

    fn parse_current(&self) -> Result<CsvRow> {
        let d = self.feature_names.len();
        let expected = d + usize::from(self.has_labels);
        let line = self.index + 2;
        if self.record.len() != expected {
            return Err(Error::Parse(format!(
                "line {line}: expected {expected} fields, found {}",
                self.record.len()
            )));
        }
        let mut values = Vec::with_capacity(d);
        for (j, field) in self.record.iter().take(d).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!("line {line}, column {j}: invalid number {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "line {line}, column {j}: non-finite value"
                )));
            }
            values.push(v);
        }
        let label = if self.has_labels {
            Some(parse_label(&self.record[d]).ok_or_else(|| {
                Error::Parse(format!(
                    "line {line}: label must be 0 or 1, got {:?}",
                    &self.record[d]
                ))
            })?)
        } else {
            None
        };
        Ok(CsvRow {
            index: self.index,
            values,
            label,
        })
    }
}

impl<R: Read> Iterator for CsvRows<R> {
    type Item = Result<CsvRow>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.reader.read_record(&mut self.record) {
            Ok(false) => None,
            Ok(true) => {
                let row = self.parse_current();
                self.index += 1;
                Some(row)
            }
            Err(e) => Some(Err(e.into())),
        }
    }
}

fn parse_label(field: &str) -> Option<u8> {
    match field {
        "0" => Some(0),
        "1" => Some(1),
        other => match other.parse::<f64>() {
            Ok(0.0) => Some(0),
            Ok(1.0) => Some(1),
            _ => None,
        },
    }
}

/// Reads a `(index, score)` CSV and returns scores ordered by row index.
///
/// Every index in `0..n_rows` must appear exactly once.
pub fn read_scores<R: Read>(reader: R, n_rows: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut scores = vec![f64::NAN; n_rows];
    let mut seen = vec![false; n_rows];
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::Parse(format!("line {}: expected index,score", line + 2)));
        }
        let index: usize = record[0]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: invalid index", line + 2)))?;
        let score: f64 = record[1]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: invalid score", line + 2)))?;
        if index >= n_rows {
            return Err(Error::Parse(format!(
                "line {}: index {index} out of range for {n_rows} rows",
                line + 2
            )));
        }
        if seen[index] {
            return Err(Error::Parse(format!("duplicate score for row {index}")));
        }
        if !score.is_finite() {
            return Err(Error::Parse(format!("non-finite score for row {index}")));
        }
        seen[index] = true;
        scores[index] = score;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse(format!("no score for row {missing}")));
    }
    Ok(scores)
}

pub fn write_scores<W: Write>(writer: W, scores: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "score"])?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
