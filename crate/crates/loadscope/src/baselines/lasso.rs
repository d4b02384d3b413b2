use serde::{Deserialize, Serialize};

use crate::data::Table;
use crate::stats::mean;

use super::BaselineError;

/// Linear model fitted by [`lasso_fit`]. Coefficients refer to the feature
/// columns the model was fitted on, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    names: Vec<String>,
    coefficients: Vec<f64>,
    intercept: f64,
    lambda: f64,
    sweeps: usize,
}

impl LassoModel {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Coordinate-descent sweeps used to reach convergence.
    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn predict(&self, x: &Table) -> Result<Vec<f64>, BaselineError> {
        if x.names() != self.names {
            return Err(BaselineError::Misaligned(format!(
                "prediction columns {:?} differ from fitted columns {:?}",
                x.names(),
                self.names
            )));
        }
        Ok((0..x.n_rows())
            .map(|r| {
                self.intercept
                    + self
                        .coefficients
                        .iter()
                        .enumerate()
                        .map(|(j, b)| b * x.value(r, j))
                        .sum::<f64>()
            })
            .collect())
    }
}

/// Fit `min (1/2n)||y - Xb - b0||^2 + lambda*||b||_1` by cyclic coordinate
/// descent with soft thresholding.
///
/// The unpenalized intercept updates first in every sweep; convergence is
/// declared when no coefficient (intercept included) moves by `tol` or
/// more within a sweep. Columns are assumed standardized for the penalty
/// to act evenly, but the optimizer itself is scale-agnostic. Zero-norm
/// columns keep coefficient 0.
pub fn lasso_fit(
    x: &Table,
    y: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LassoModel, BaselineError> {
    let n = x.n_rows();
    if n == 0 || y.len() != n {
        return Err(BaselineError::Misaligned(format!(
            "{} targets for {} rows",
            y.len(),
            n
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(BaselineError::InvalidParams(format!("lambda {lambda} must be >= 0")));
    }
    if !(tol > 0.0) {
        return Err(BaselineError::InvalidParams(format!("tol {tol} must be > 0")));
    }
    if max_iter == 0 {
        return Err(BaselineError::InvalidParams("max_iter must be >= 1".into()));
    }

    let p = x.n_cols();
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..p)
        .map(|j| x.col(j).iter().map(|v| v * v).sum::<f64>() / nf)
        .collect();

    let mut beta = vec![0.0f64; p];
    let mut intercept = mean(y);
    let mut resid: Vec<f64> = y.iter().map(|v| v - intercept).collect();

    for sweep in 1..=max_iter {
        let mut max_step = 0.0f64;

        let db = mean(&resid);
        if db != 0.0 {
            intercept += db;
            for r in &mut resid {
                *r -= db;
            }
            max_step = db.abs();
        }

        for j in 0..p {
            if col_sq[j] <= f64::MIN_POSITIVE {
                continue;
            }
            let col = x.col(j);
            let rho = col.iter().zip(&resid).map(|(xv, rv)| xv * rv).sum::<f64>() / nf
                + col_sq[j] * beta[j];
            let new = soft_threshold(rho, lambda) / col_sq[j];
            let step = new - beta[j];
            if step != 0.0 {
                for (rv, xv) in resid.iter_mut().zip(col) {
                    *rv -= step * xv;
                }
                beta[j] = new;
                max_step = max_step.max(step.abs());
            }
        }

        if max_step < tol {
            return Ok(LassoModel {
                names: x.names().to_vec(),
                coefficients: beta,
                intercept,
                lambda,
                sweeps: sweep,
            });
        }
    }
    Err(BaselineError::NotConverged { max_iter })
}

fn soft_threshold(rho: f64, lambda: f64) -> f64 {
    if rho > lambda {
        rho - lambda
    } else if rho < -lambda {
        rho + lambda
    } else {
        0.0
    }
}
