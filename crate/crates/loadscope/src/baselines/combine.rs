use serde::{Deserialize, Serialize};

use crate::data::{Table, HOURS};
use crate::stats::mean_std;

use super::lasso::lasso_fit;
use super::BaselineError;

/// Penalty grid searched when fitting the PF-SCF combination.
pub const PF_SCF_LAMBDA_GRID: [f64; 4] = [0.0, 1e-4, 1e-3, 1e-2];

const CD_TOL: f64 = 1e-11;
const CD_MAX_ITER: usize = 200_000;

/// Learned combination `intercept + w_pf * PF + w_scf * SCF`, fitted on
/// validation forecasts and applied unchanged at test time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfScfModel {
    pf_weight: f64,
    scf_weight: f64,
    intercept: f64,
    lambda: f64,
}

impl PfScfModel {
    pub fn pf_weight(&self) -> f64 {
        self.pf_weight
    }

    pub fn scf_weight(&self) -> f64 {
        self.scf_weight
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn predict(&self, pf: &[f64; HOURS], scf: &[f64; HOURS]) -> [f64; HOURS] {
        std::array::from_fn(|h| {
            self.intercept + self.pf_weight * pf[h] + self.scf_weight * scf[h]
        })
    }
}

/// Fit the PF-SCF combination on aligned validation days.
///
/// The penalty comes from [`PF_SCF_LAMBDA_GRID`], scored on a chronological
/// 70/30 sub-split of the validation days, then refitted on all of them.
/// If the shrunk refit fits validation worse than the better single
/// component, the unpenalized refit is used instead; ordinary least
/// squares with an intercept can never lose to either component
/// in-sample, so the returned model always dominates both.
pub fn combine_pf_scf(
    pf: &[[f64; HOURS]],
    scf: &[[f64; HOURS]],
    truth: &[[f64; HOURS]],
) -> Result<PfScfModel, BaselineError> {
    let days = truth.len();
    if days == 0 || pf.len() != days || scf.len() != days {
        return Err(BaselineError::Misaligned(format!(
            "pf {} days, scf {} days, truth {} days",
            pf.len(),
            scf.len(),
            days
        )));
    }

    let flat = |d: &[[f64; HOURS]]| -> Vec<f64> { d.iter().flatten().copied().collect() };
    let (pf_flat, scf_flat, y_flat) = (flat(pf), flat(scf), flat(truth));

    let lambda = if days >= 2 {
        let cut = ((days * 7) / 10).clamp(1, days - 1) * HOURS;
        let mut best = (f64::INFINITY, PF_SCF_LAMBDA_GRID[0]);
        for &lam in &PF_SCF_LAMBDA_GRID {
            let m = fit_weights(&pf_flat[..cut], &scf_flat[..cut], &y_flat[..cut], lam)?;
            let r = rmse_of(&m, &pf_flat[cut..], &scf_flat[cut..], &y_flat[cut..]);
            if r < best.0 {
                best = (r, lam);
            }
        }
        best.1
    } else {
        0.0
    };

    let model = fit_weights(&pf_flat, &scf_flat, &y_flat, lambda)?;
    let combined = rmse_of(&model, &pf_flat, &scf_flat, &y_flat);
    let pf_alone = rmse_raw(&pf_flat, &y_flat);
    let scf_alone = rmse_raw(&scf_flat, &y_flat);
    if combined <= pf_alone.min(scf_alone) + 1e-9 {
        return Ok(model);
    }
    fit_weights(&pf_flat, &scf_flat, &y_flat, 0.0)
}

/// LASSO over the two standardized component columns, with coefficients
/// mapped back to the original scale.
fn fit_weights(
    pf: &[f64],
    scf: &[f64],
    y: &[f64],
    lambda: f64,
) -> Result<PfScfModel, BaselineError> {
    let (pf_m, pf_s) = moments(pf);
    let (scf_m, scf_s) = moments(scf);
    let std_col = |v: &[f64], m: f64, s: f64| v.iter().map(|x| (x - m) / s).collect();
    let x = Table::new(
        vec!["pf".into(), "scf".into()],
        vec![std_col(pf, pf_m, pf_s), std_col(scf, scf_m, scf_s)],
    )?;
    let fit = lasso_fit(&x, y, lambda, CD_TOL, CD_MAX_ITER)?;
    let pf_weight = fit.coefficients()[0] / pf_s;
    let scf_weight = fit.coefficients()[1] / scf_s;
    Ok(PfScfModel {
        pf_weight,
        scf_weight,
        intercept: fit.intercept() - pf_weight * pf_m - scf_weight * scf_m,
        lambda,
    })
}

/// Mean and std of a component column; a constant column passes through
/// with unit scale so standardization stays a bijection.
fn moments(v: &[f64]) -> (f64, f64) {
    let (m, s) = mean_std(v);
    (m, if s > 0.0 { s } else { 1.0 })
}

fn rmse_of(model: &PfScfModel, pf: &[f64], scf: &[f64], y: &[f64]) -> f64 {
    let sse: f64 = (0..y.len())
        .map(|i| {
            let p = model.intercept + model.pf_weight * pf[i] + model.scf_weight * scf[i];
            (y[i] - p) * (y[i] - p)
        })
        .sum();
    (sse / y.len() as f64).sqrt()
}

fn rmse_raw(pred: &[f64], y: &[f64]) -> f64 {
    let sse: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    (sse / y.len() as f64).sqrt()
}
