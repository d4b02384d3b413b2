use serde::{Deserialize, Serialize};

use super::{DataError, Table};

/// Per-column affine transform `(x - mean) / std` fitted on training data.
///
/// Uses the population (1/N) standard deviation; the choice is irrelevant to
/// model behavior as long as it is applied consistently, which this type
/// enforces by owning both directions of the transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    names: Vec<String>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    /// Fit means and standard deviations per column.
    ///
    /// Rejects constant columns (zero variance) and non-finite values.
    pub fn fit(matrix: &Table) -> Result<Self, DataError> {
        Self::fit_inner(matrix, false)
    }

    /// Like [`Standardizer::fit`], but constant columns pass through
    /// unscaled (`mean = 0`, `std = 1`) instead of erroring. Used by the
    /// pipeline for design matrices that legitimately contain all-zero
    /// dummy columns (e.g. a holiday class absent from the training range).
    pub fn fit_skipping_constant(matrix: &Table) -> Result<Self, DataError> {
        Self::fit_inner(matrix, true)
    }

    fn fit_inner(matrix: &Table, skip_constant: bool) -> Result<Self, DataError> {
        if matrix.n_rows() < 2 {
            return Err(DataError::TooFewRows(matrix.n_rows()));
        }
        if let Some((column, row)) = matrix.find_non_finite() {
            return Err(DataError::NonFinite { column, row });
        }
        let n = matrix.n_rows() as f64;
        let mut means = Vec::with_capacity(matrix.n_cols());
        let mut stds = Vec::with_capacity(matrix.n_cols());
        for (name, col) in matrix.names().iter().zip(matrix.columns()) {
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            if std <= 0.0 {
                if skip_constant {
                    means.push(0.0);
                    stds.push(1.0);
                    continue;
                }
                return Err(DataError::ConstantColumn(name.clone()));
            }
            means.push(mean);
            stds.push(std);
        }
        Ok(Self { names: matrix.names().to_vec(), means, stds })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.means[i])
    }

    pub fn std(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.stds[i])
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Standardize a table. Columns are matched by name; every input column
    /// must have been present at fit time.
    pub fn apply(&self, matrix: &Table) -> Result<Table, DataError> {
        self.transform(matrix, false)
    }

    /// Undo [`Standardizer::apply`].
    pub fn inverse(&self, matrix: &Table) -> Result<Table, DataError> {
        self.transform(matrix, true)
    }

    fn transform(&self, matrix: &Table, invert: bool) -> Result<Table, DataError> {
        let mut cols = Vec::with_capacity(matrix.n_cols());
        for (name, col) in matrix.names().iter().zip(matrix.columns()) {
            let i = self
                .index(name)
                .ok_or_else(|| DataError::ColumnMismatch(format!("column {name} was not fitted")))?;
            let (m, s) = (self.means[i], self.stds[i]);
            let out = if invert {
                col.iter().map(|v| v * s + m).collect()
            } else {
                col.iter().map(|v| (v - m) / s).collect()
            };
            cols.push(out);
        }
        Table::new(matrix.names().to_vec(), cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(names: &[&str], cols: Vec<Vec<f64>>) -> Table {
        Table::new(names.iter().map(|s| s.to_string()).collect(), cols).unwrap()
    }

    #[test]
    fn fit_computes_population_moments() {
        // mean 2, population std sqrt(2/3) ~= 0.8165
        let t = table(&["x"], vec![vec![1.0, 2.0, 3.0]]);
        let s = Standardizer::fit(&t).unwrap();
        assert!((s.mean("x").unwrap() - 2.0).abs() < 1e-15);
        assert!((s.std("x").unwrap() - 0.816_496_580_927_726).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_rejected() {
        let t = table(&["x"], vec![vec![5.0, 5.0, 5.0]]);
        assert!(matches!(Standardizer::fit(&t), Err(DataError::ConstantColumn(_))));
        let s = Standardizer::fit_skipping_constant(&t).unwrap();
        let out = s.apply(&t).unwrap();
        assert_eq!(out.col(0), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn two_column_means() {
        let t = table(&["a", "b"], vec![vec![0.0, 2.0], vec![10.0, 30.0]]);
        let s = Standardizer::fit(&t).unwrap();
        assert_eq!(s.mean("a").unwrap(), 1.0);
        assert_eq!(s.mean("b").unwrap(), 20.0);
    }

    #[test]
    fn applying_to_fit_data_centers_and_scales() {
        let t = table(&["a", "b"], vec![vec![1.0, 4.0, 7.0, 9.0], vec![-3.0, 0.5, 2.0, 11.0]]);
        let s = Standardizer::fit(&t).unwrap();
        let z = s.apply(&t).unwrap();
        for c in 0..2 {
            let col = z.col(c);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn value_at_mean_maps_to_zero() {
        let t = table(&["a"], vec![vec![1.0, 3.0]]);
        let s = Standardizer::fit(&t).unwrap();
        let probe = table(&["a"], vec![vec![2.0]]);
        assert_eq!(s.apply(&probe).unwrap().col(0)[0], 0.0);
    }

    #[test]
    fn mismatched_column_errors() {
        let t = table(&["a"], vec![vec![1.0, 3.0]]);
        let s = Standardizer::fit(&t).unwrap();
        let probe = table(&["z"], vec![vec![2.0]]);
        assert!(matches!(s.apply(&probe), Err(DataError::ColumnMismatch(_))));
    }
}
