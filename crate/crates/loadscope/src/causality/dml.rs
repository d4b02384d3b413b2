use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Table;
use crate::gbdt::{fit_ensemble, HyperParams, PresortedMatrix};
use crate::ingest::AlignedPanel;
use crate::stats::{mean_std, task_seed};

use super::CausalityError;

/// Cross-fitted partially-linear effect estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmlResult {
    /// Effect of one treatment unit on the outcome.
    pub delta: f64,
    /// Heteroscedasticity-robust (HC0) standard error.
    pub se: f64,
    /// 95% confidence interval.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub folds: usize,
    pub n: usize,
}

impl DmlResult {
    pub fn ci_contains(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }
}

const Z_975: f64 = 1.959963984540054;

/// Double machine learning estimate of the effect of `t` on `y` given
/// covariates `x`.
///
/// Both nuisance functions (treatment and outcome on covariates) are
/// boosted ensembles fitted on fold complements; each row is residualized
/// by models that never saw it. The effect is the through-origin OLS slope
/// of outcome residuals on treatment residuals, with HC0 standard errors.
pub fn dml_effect(
    t: &[f64],
    y: &[f64],
    x: &Table,
    folds: usize,
    params: &HyperParams,
    seed: u64,
) -> Result<DmlResult, CausalityError> {
    let n = x.n_rows();
    if t.len() != n || y.len() != n {
        return Err(CausalityError::Misaligned(format!(
            "{} treatments, {} outcomes, {} covariate rows",
            t.len(),
            y.len(),
            n
        )));
    }
    if folds < 2 {
        return Err(CausalityError::InvalidParams(format!("folds {folds} must be >= 2")));
    }
    if n < folds * 2 {
        return Err(CausalityError::TooShort { needed: folds * 2, got: n });
    }

    // A covariate column identical to the treatment determines it outright;
    // catch that before burning folds on nuisance fits that can only
    // approximate the copy.
    if x.columns().iter().any(|col| col.as_slice() == t) {
        return Err(CausalityError::DegenerateTreatment);
    }

    let mut rows: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(task_seed(seed, &["dml", "folds"]));
    rows.shuffle(&mut rng);

    let mut t_res = vec![f64::NAN; n];
    let mut y_res = vec![f64::NAN; n];
    for k in 0..folds {
        let lo = k * n / folds;
        let hi = (k + 1) * n / folds;
        let held_out = &rows[lo..hi];
        let mut kept: Vec<usize> = rows[..lo].iter().chain(&rows[hi..]).copied().collect();
        kept.sort_unstable();
        let sub = PresortedMatrix::new(x.select_rows(&kept));
        let t_sub: Vec<f64> = kept.iter().map(|&r| t[r]).collect();
        let y_sub: Vec<f64> = kept.iter().map(|&r| y[r]).collect();
        let label = k.to_string();
        let t_model = fit_ensemble(&sub, &t_sub, None, params, task_seed(seed, &["dml", "t", &label]))?;
        let y_model = fit_ensemble(&sub, &y_sub, None, params, task_seed(seed, &["dml", "y", &label]))?;
        for &r in held_out {
            let get = |f: usize| x.value(r, f);
            t_res[r] = t[r] - t_model.predict_row_raw(&get);
            y_res[r] = y[r] - y_model.predict_row_raw(&get);
        }
    }

    let su2: f64 = t_res.iter().map(|u| u * u).sum();
    let t_sd = mean_std(t).1;
    if su2 <= (1e-6 * t_sd.max(1e-9)).powi(2) * n as f64 {
        return Err(CausalityError::DegenerateTreatment);
    }
    let suv: f64 = t_res.iter().zip(&y_res).map(|(u, v)| u * v).sum();
    let delta = suv / su2;
    // HC0: sandwich variance of the through-origin slope.
    let meat: f64 = t_res
        .iter()
        .zip(&y_res)
        .map(|(u, v)| {
            let e = v - delta * u;
            u * u * e * e
        })
        .sum();
    let se = meat.sqrt() / su2;
    Ok(DmlResult {
        delta,
        se,
        ci_lo: delta - Z_975 * se,
        ci_hi: delta + Z_975 * se,
        folds,
        n,
    })
}

/// Per-horizon causal effect of a daily textual feature on daily mean
/// demand.
///
/// For each horizon h: treatment = the feature on issue day d, outcome =
/// mean demand of day d+h, covariates = the other textual series, the
/// economic series, and the issue day's mean temperature. Days run over
/// the span where all of those exist.
pub fn causal_profile(
    panel: &AlignedPanel,
    feature: &str,
    region: &str,
    horizons: &[u32],
    folds: usize,
    params: &HyperParams,
    seed: u64,
) -> Result<Vec<(u32, DmlResult)>, CausalityError> {
    let demand = panel
        .demand(region)
        .ok_or_else(|| CausalityError::UnknownRegion(region.to_string()))?;
    let treated = panel
        .textual()
        .iter()
        .find(|s| s.name() == feature)
        .ok_or_else(|| CausalityError::UnknownFeature(feature.to_string()))?;
    let temperature = panel
        .temperature_for_region(region)
        .ok_or_else(|| CausalityError::UnknownRegion(format!("{region} (no temperature)")))?;

    let first = demand.first_full_day().ok_or(CausalityError::TooShort { needed: 2, got: 0 })?;
    let last = demand.last_full_day().ok_or(CausalityError::TooShort { needed: 2, got: 0 })?;
    let daily_mean = |date: NaiveDate| -> Option<f64> {
        demand.day_profile(date).map(|p| p.iter().sum::<f64>() / p.len() as f64)
    };
    let temp_mean = |date: NaiveDate| -> Option<f64> {
        temperature.day_profile(date).map(|p| p.iter().sum::<f64>() / p.len() as f64)
    };

    let others: Vec<_> = panel
        .textual()
        .iter()
        .filter(|s| s.name() != feature)
        .chain(panel.economics().iter())
        .collect();
    let mut names: Vec<String> = others.iter().map(|s| s.name().to_string()).collect();
    names.push("temp_mean".to_string());

    let mut out = Vec::with_capacity(horizons.len());
    for &h in horizons {
        if !(1..=30).contains(&h) {
            return Err(CausalityError::InvalidParams(format!("horizon {h} outside 1..=30")));
        }
        let mut t_col = Vec::new();
        let mut y_col = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];

        let mut d = first.max(treated.start());
        let stop = last.min(treated.end());
        while d <= stop {
            let target = d + chrono::Days::new(h as u64);
            let row = (
                treated.value_on(d),
                if target <= last { daily_mean(target) } else { None },
                temp_mean(d),
            );
            if let (Some(tv), Some(yv), Some(tempv)) = row {
                let controls: Option<Vec<f64>> = others.iter().map(|s| s.value_on(d)).collect();
                if let Some(mut vals) = controls {
                    vals.push(tempv);
                    t_col.push(tv);
                    y_col.push(yv);
                    for (slot, v) in cols.iter_mut().zip(vals) {
                        slot.push(v);
                    }
                }
            }
            d = d.succ_opt().expect("date overflow");
        }

        let x = Table::new(names.clone(), cols)?;
        let result = dml_effect(
            &t_col,
            &y_col,
            &x,
            folds,
            params,
            task_seed(seed, &["causal-profile", region, feature, &h.to_string()]),
        )?;
        out.push((h, result));
    }
    Ok(out)
}
