use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Table;
use crate::stats::{mean, mean_std, task_seed};

use super::ensemble::{fit_ensemble, Ensemble, TargetScale};
use super::{GbdtError, HyperParams, PresortedMatrix};

const OOF_FOLDS: usize = 5;

/// Probabilistic ensemble predicting a Gaussian (mu, sigma) per row.
///
/// Stage one is an ordinary point ensemble for the mean. Stage two boosts
/// on log squared out-of-fold residuals to capture how noise varies with
/// the features. Because the log of a squared Gaussian is biased low by
/// E[ln chi2_1] ~ -1.27, the raw exp of stage two underestimates variance
/// by ~3.6x; `calibration` rescales it so residual moments match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianEnsemble {
    mu: Ensemble,
    logvar: Ensemble,
    calibration: f64,
    var_floor: f64,
    target_scale: Option<TargetScale>,
}

impl GaussianEnsemble {
    pub fn mu(&self) -> &Ensemble {
        &self.mu
    }

    pub fn logvar(&self) -> &Ensemble {
        &self.logvar
    }

    pub fn calibration(&self) -> f64 {
        self.calibration
    }

    pub fn var_floor(&self) -> f64 {
        self.var_floor
    }

    pub fn target_scale(&self) -> Option<TargetScale> {
        self.target_scale
    }

    pub fn set_target_scale(&mut self, scale: TargetScale) {
        self.target_scale = Some(scale);
    }

    /// Predict (mu, sigma) per row, mapped to target units when a scale is
    /// attached; sigma scales by the std alone.
    pub fn predict(&self, x: &Table) -> Result<(Vec<f64>, Vec<f64>), GbdtError> {
        let mu = self.mu.predict_raw_table(x)?;
        let z = self.logvar.predict_raw_table(x)?;
        let mut mu_out = Vec::with_capacity(mu.len());
        let mut sigma_out = Vec::with_capacity(mu.len());
        for (m, zi) in mu.iter().zip(&z) {
            let var = (self.calibration * zi.exp()).max(self.var_floor);
            let sigma = var.sqrt();
            match self.target_scale {
                Some(s) => {
                    mu_out.push(s.to_unit(*m));
                    sigma_out.push(sigma * s.std);
                }
                None => {
                    mu_out.push(*m);
                    sigma_out.push(sigma);
                }
            }
        }
        Ok((mu_out, sigma_out))
    }
}

impl Ensemble {
    /// Raw-space batch prediction ignoring any attached target scale.
    fn predict_raw_table(&self, x: &Table) -> Result<Vec<f64>, GbdtError> {
        self.check_columns(x)?;
        Ok((0..x.n_rows())
            .map(|r| self.predict_row_raw(&|f| x.value(r, f)))
            .collect())
    }
}

/// Fit the two-stage Gaussian ensemble.
///
/// The mean stage uses exactly the same seed and parameters as a plain
/// [`fit_ensemble`] call, so point forecasts agree between the two model
/// kinds. Residuals feeding the variance stage come from 5-fold
/// out-of-fold mean models, preventing the variance from learning the
/// in-sample optimism of the mean fit. The variance floor is
/// (1e-3 * std(y))^2, keeping sigma strictly positive even on noiseless
/// targets.
pub fn fit_gaussian(
    train: &PresortedMatrix,
    y: &[f64],
    val: Option<(&Table, &[f64])>,
    params: &HyperParams,
    seed: u64,
) -> Result<GaussianEnsemble, GbdtError> {
    let n = train.n_rows();
    if n < 2 * OOF_FOLDS {
        return Err(GbdtError::DegenerateData(format!(
            "{n} rows is too few for {OOF_FOLDS}-fold residual estimation"
        )));
    }
    let mu = fit_ensemble(train, y, val, params, seed)?;

    let (_, sd_y) = mean_std(y);
    let var_floor = if sd_y > 0.0 { (1e-3 * sd_y).powi(2) } else { 1e-12 };

    // Out-of-fold mean predictions via shuffled contiguous folds.
    let mut rows: Vec<usize> = (0..n).collect();
    let mut fold_rng =
        ChaCha8Rng::seed_from_u64(task_seed(seed, &["gaussian", "folds"]));
    rows.shuffle(&mut fold_rng);
    let mut mu_oof = vec![f64::NAN; n];
    for k in 0..OOF_FOLDS {
        let lo = k * n / OOF_FOLDS;
        let hi = (k + 1) * n / OOF_FOLDS;
        let held_out = &rows[lo..hi];
        let mut kept: Vec<usize> = rows[..lo].iter().chain(&rows[hi..]).copied().collect();
        kept.sort_unstable();
        let sub = PresortedMatrix::new(train.table().select_rows(&kept));
        let y_sub: Vec<f64> = kept.iter().map(|&r| y[r]).collect();
        let fold_seed = task_seed(seed, &["gaussian", "mu-fold", &k.to_string()]);
        let fold_model = fit_ensemble(&sub, &y_sub, val, params, fold_seed)?;
        let xt = train.table();
        for &r in held_out {
            mu_oof[r] = fold_model.predict_row_raw(&|f| xt.value(r, f));
        }
    }

    let log_sq = |res: f64| (res * res).max(var_floor).ln();
    let z: Vec<f64> = (0..n).map(|r| log_sq(y[r] - mu_oof[r])).collect();

    // Validation targets for the variance stage reuse the full mean model.
    let val_z: Option<(&Table, Vec<f64>)> = match val {
        Some((xv, yv)) => {
            let mu_v = mu.predict_raw_table(xv)?;
            Some((xv, yv.iter().zip(&mu_v).map(|(t, m)| log_sq(t - m)).collect()))
        }
        None => None,
    };
    let logvar_seed = task_seed(seed, &["gaussian", "logvar"]);
    let logvar = fit_ensemble(
        train,
        &z,
        val_z.as_ref().map(|(xv, zv)| (*xv, zv.as_slice())),
        params,
        logvar_seed,
    )?;

    // Moment-match: scale exp(z-hat) so that mean(res^2 / var-hat) = 1 on
    // held-out data (validation when present, out-of-fold train otherwise).
    let ratios: Vec<f64> = match val {
        Some((xv, yv)) => {
            let mu_v = mu.predict_raw_table(xv)?;
            let z_v = logvar.predict_raw_table(xv)?;
            (0..yv.len())
                .map(|r| {
                    let res = yv[r] - mu_v[r];
                    res * res / z_v[r].exp()
                })
                .collect()
        }
        None => {
            let z_t = logvar.predict_raw_table(train.table())?;
            (0..n)
                .map(|r| {
                    let res = y[r] - mu_oof[r];
                    res * res / z_t[r].exp()
                })
                .collect()
        }
    };
    let mut calibration = mean(&ratios);
    if !calibration.is_finite() || calibration < 1e-12 {
        calibration = 1e-12;
    }

    Ok(GaussianEnsemble { mu, logvar, calibration, var_floor, target_scale: None })
}
