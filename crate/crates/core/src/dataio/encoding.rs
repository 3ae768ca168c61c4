use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Cell, FeatureMatrix, RawTable};
use crate::{Error, Result};

/// Ordinal encoding of text columns, fitted on one table and reusable on any
/// table with the same column layout.
///
/// Categories get ordinals in order of first appearance. A category never seen
/// while fitting maps to the reserved ordinal `map.len()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub column_names: Vec<String>,
    /// Raw columns that become features, in output order.
    pub feature_columns: Vec<usize>,
    pub categorical_columns: BTreeSet<usize>,
    pub category_maps: BTreeMap<usize, BTreeMap<String, usize>>,
    /// Raw column index of the forecast target.
    pub target_column: usize,
}

impl EncodingSpec {
    pub fn fit(table: &RawTable, target_column: usize) -> Result<Self> {
        Self::fit_excluding(table, target_column, &[])
    }

    /// Fits on every column except `excluded` (e.g. label columns).
    pub fn fit_excluding(table: &RawTable, target_column: usize, excluded: &[usize]) -> Result<Self> {
        let width = table.width();
        if target_column >= width {
            return Err(Error::config(format!(
                "target column {target_column} out of range for {width} columns"
            )));
        }
        if excluded.contains(&target_column) {
            return Err(Error::config("target column cannot be excluded"));
        }
        if let Some(pos) = table.rows.iter().position(|r| r[target_column].as_number().is_none()) {
            return Err(Error::data(
                table.lines.get(pos).copied(),
                format!("target column '{}' has a non-numeric cell", table.column_names[target_column]),
            ));
        }

        let feature_columns: Vec<usize> = (0..width).filter(|c| !excluded.contains(c)).collect();
        let mut categorical_columns = BTreeSet::new();
        let mut category_maps = BTreeMap::new();
        for &col in &feature_columns {
            let all_text = table.rows.iter().all(|r| matches!(r[col], Cell::Text(_)));
            if !all_text {
                continue;
            }
            let mut map = BTreeMap::new();
            for row in &table.rows {
                if let Cell::Text(s) = &row[col] {
                    let next = map.len();
                    map.entry(s.clone()).or_insert(next);
                }
            }
            categorical_columns.insert(col);
            category_maps.insert(col, map);
        }

        Ok(Self {
            column_names: table.column_names.clone(),
            feature_columns,
            categorical_columns,
            category_maps,
            target_column,
        })
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_columns
            .iter()
            .map(|&c| self.column_names[c].clone())
            .collect()
    }

    /// Position of the target among the encoded features.
    pub fn target_feature_index(&self) -> usize {
        self.feature_columns
            .iter()
            .position(|&c| c == self.target_column)
            .expect("target column is always a feature")
    }

    /// Encodes one raw record into feature values.
    pub fn encode_row(&self, row: &[Cell], line: Option<usize>) -> Result<Vec<f64>> {
        if row.len() != self.column_names.len() {
            return Err(Error::data(
                line,
                format!("expected {} cells, found {}", self.column_names.len(), row.len()),
            ));
        }
        self.feature_columns
            .iter()
            .map(|&col| match self.category_maps.get(&col) {
                Some(map) => Ok(match &row[col] {
                    Cell::Text(s) => map.get(s).copied().unwrap_or(map.len()) as f64,
                    // numbers never occur in a fitted categorical column
                    Cell::Number(_) => map.len() as f64,
                }),
                None => row[col].as_number().ok_or_else(|| {
                    Error::data(
                        line,
                        format!("column '{}' expects a number", self.column_names[col]),
                    )
                }),
            })
            .collect()
    }

    pub fn apply(&self, table: &RawTable) -> Result<FeatureMatrix> {
        if table.column_names != self.column_names {
            return Err(Error::shape(format!(
                "table has {} columns {:?}, encoding was fitted on {:?}",
                table.width(),
                table.column_names,
                self.column_names
            )));
        }
        let mut values = Vec::with_capacity(table.row_count() * self.feature_columns.len());
        for (row, &line) in table.rows.iter().zip(&table.lines) {
            values.extend(self.encode_row(row, Some(line))?);
        }
        FeatureMatrix::new(
            values,
            table.row_count(),
            self.feature_names(),
            self.target_feature_index(),
        )
    }
}
