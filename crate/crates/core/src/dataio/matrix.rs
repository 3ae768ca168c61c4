use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Time-ordered numeric feature table, row-major (`rows` time steps by `cols`
/// features).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    feature_names: Vec<String>,
    target_index: usize,
}

impl FeatureMatrix {
    pub fn new(
        values: Vec<f64>,
        rows: usize,
        feature_names: Vec<String>,
        target_index: usize,
    ) -> Result<Self> {
        let cols = feature_names.len();
        if rows == 0 || cols == 0 {
            return Err(Error::shape("feature matrix needs at least one row and one column"));
        }
        if values.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} values do not fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if target_index >= cols {
            return Err(Error::shape(format!(
                "target index {target_index} out of range for {cols} features"
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(
                None,
                format!("non-finite value at row {}, column {}", pos / cols, pos % cols),
            ));
        }
        Ok(Self {
            values,
            rows,
            cols,
            feature_names,
            target_index,
        })
    }

    /// Builds a matrix from column vectors, naming features `f0, f1, ...`.
    pub fn from_columns(columns: &[Vec<f64>], target_index: usize) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::shape("columns have different lengths"));
        }
        let mut values = Vec::with_capacity(rows * columns.len());
        for r in 0..rows {
            values.extend(columns.iter().map(|c| c[r]));
        }
        let names = (0..columns.len()).map(|i| format!("f{i}")).collect();
        Self::new(values, rows, names, target_index)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn target_column(&self) -> Vec<f64> {
        self.column(self.target_index)
    }

    /// Rows `[start, end)` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.rows {
            return Err(Error::shape(format!(
                "row range {start}..{end} invalid for {} rows",
                self.rows
            )));
        }
        Ok(Self {
            values: self.values[start * self.cols..end * self.cols].to_vec(),
            rows: end - start,
            cols: self.cols,
            feature_names: self.feature_names.clone(),
            target_index: self.target_index,
        })
    }

    /// Keeps the given feature columns, in the given order. The target must be
    /// among them.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::shape("no columns selected"));
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.cols) {
            return Err(Error::shape(format!("column {bad} out of range")));
        }
        let target_index = columns
            .iter()
            .position(|&c| c == self.target_index)
            .ok_or_else(|| Error::shape("selected columns must include the target"))?;
        let mut values = Vec::with_capacity(self.rows * columns.len());
        for r in 0..self.rows {
            let row = self.row(r);
            values.extend(columns.iter().map(|&c| row[c]));
        }
        Ok(Self {
            values,
            rows: self.rows,
            cols: columns.len(),
            feature_names: columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
            target_index,
        })
    }
}
