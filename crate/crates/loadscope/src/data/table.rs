use serde::{Deserialize, Serialize};

use super::DataError;

/// A table of named real-valued columns, stored column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
    n_rows: usize,
}

impl Table {
    pub fn new(names: Vec<String>, cols: Vec<Vec<f64>>) -> Result<Self, DataError> {
        if names.len() != cols.len() {
            return Err(DataError::ShapeMismatch(format!(
                "{} names vs {} columns",
                names.len(),
                cols.len()
            )));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(DataError::DuplicateColumn(a.clone()));
            }
        }
        let n_rows = cols.first().map_or(0, Vec::len);
        if let Some(bad) = cols.iter().position(|c| c.len() != n_rows) {
            return Err(DataError::ShapeMismatch(format!(
                "column {} has {} rows, expected {n_rows}",
                names[bad],
                cols[bad].len()
            )));
        }
        Ok(Self { names, cols, n_rows })
    }

    pub fn empty(n_rows: usize) -> Self {
        Self { names: Vec::new(), cols: Vec::new(), n_rows }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn col(&self, idx: usize) -> &[f64] {
        &self.cols[idx]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.cols
    }

    pub fn col_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn col_by_name(&self, name: &str) -> Option<&[f64]> {
        self.col_index(name).map(|i| self.col(i))
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.cols[col][row]
    }

    pub fn push_col(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<(), DataError> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(DataError::DuplicateColumn(name));
        }
        if values.len() != self.n_rows {
            return Err(DataError::ShapeMismatch(format!(
                "column {name} has {} rows, expected {}",
                values.len(),
                self.n_rows
            )));
        }
        self.names.push(name);
        self.cols.push(values);
        Ok(())
    }

    /// New table holding only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let cols = self
            .cols
            .iter()
            .map(|c| rows.iter().map(|&r| c[r]).collect())
            .collect();
        Self { names: self.names.clone(), cols, n_rows: rows.len() }
    }

    /// New table holding only the named columns, in the given order.
    pub fn select_cols(&self, names: &[&str]) -> Result<Self, DataError> {
        let mut out_names = Vec::with_capacity(names.len());
        let mut out_cols = Vec::with_capacity(names.len());
        for &n in names {
            let idx = self
                .col_index(n)
                .ok_or_else(|| DataError::ColumnMismatch(format!("missing column {n}")))?;
            out_names.push(n.to_string());
            out_cols.push(self.cols[idx].clone());
        }
        Table::new(out_names, out_cols)
    }

    /// First column whose values are non-finite, with the offending row.
    pub fn find_non_finite(&self) -> Option<(String, usize)> {
        for (name, col) in self.names.iter().zip(&self.cols) {
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Some((name.clone(), row));
            }
        }
        None
    }
}
