use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nslkdd;
use crate::{Error, Result};

/// A single CSV cell. Cells that parse as a finite real are numeric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl Cell {
    pub fn parse(raw: &str) -> Cell {
        let trimmed = raw.trim();
        match trimmed.parse::<f64>() {
            Ok(v) if v.is_finite() => Cell::Number(v),
            _ => Cell::Text(trimmed.to_owned()),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }
}

/// Rows of a comma-separated file in file order, which is treated as time order.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// 1-based source line of each row, for error reporting.
    pub lines: Vec<usize>,
}

impl RawTable {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

/// Column names used when a file has no header row. A 43-column file is taken
/// to be NSL-KDD.
pub fn default_column_names(width: usize) -> Vec<String> {
    if width == nslkdd::RECORD_WIDTH {
        nslkdd::column_names()
    } else {
        (0..width).map(|i| format!("col{i}")).collect()
    }
}

pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, has_header)
}

/// Parses comma-separated text. Every row must have the same width.
pub fn parse_csv<R: Read>(reader: R, has_header: bool) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut width: Option<usize> = None;

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            Error::data(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::data(
                    Some(line),
                    format!("expected {w} cells, found {}", record.len()),
                ));
            }
            Some(_) => {}
        }
        if has_header && header.is_none() {
            header = Some(record.iter().map(str::to_owned).collect());
            continue;
        }
        rows.push(record.iter().map(Cell::parse).collect());
        lines.push(line);
    }

    let width = width.ok_or_else(|| Error::data(None, "empty file"))?;
    if rows.is_empty() {
        return Err(Error::data(None, "file has no data rows"));
    }
    Ok(RawTable {
        column_names: header.unwrap_or_else(|| default_column_names(width)),
        rows,
        lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows_five_columns() {
        let t = parse_csv("1,2,3,4,5\n6,7,8,9,10\na,b,c,d,e\n".as_bytes(), false).unwrap();
        assert_eq!(t.row_count(), 3);
        assert_eq!(t.width(), 5);
        assert_eq!(t.rows[2][0], Cell::Text("a".into()));
        assert_eq!(t.rows[1][4], Cell::Number(10.0));
    }

    #[test]
    fn ragged_row_names_its_line() {
        let err = parse_csv("1,2,3,4,5\n1,2,3,4\n1,2,3,4,5\n".as_bytes(), false).unwrap_err();
        match err {
            Error::Data { line, .. } => assert_eq!(line, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        assert!(matches!(
            parse_csv("".as_bytes(), false),
            Err(Error::Data { .. })
        ));
        assert!(parse_csv("a,b\n".as_bytes(), true).is_err());
    }

    #[test]
    fn header_row_names_columns() {
        let t = parse_csv("x,y\n1,2\n".as_bytes(), true).unwrap();
        assert_eq!(t.column_names, vec!["x", "y"]);
        assert_eq!(t.row_count(), 1);
        assert_eq!(t.lines, vec![2]);
    }

    #[test]
    fn nan_and_inf_are_text() {
        assert_eq!(Cell::parse("nan"), Cell::Text("nan".into()));
        assert_eq!(Cell::parse("inf"), Cell::Text("inf".into()));
        assert_eq!(Cell::parse(" 4.5 "), Cell::Number(4.5));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_csv("/nonexistent/flows.csv", false),
            Err(Error::Io { .. })
        ));
    }
}
