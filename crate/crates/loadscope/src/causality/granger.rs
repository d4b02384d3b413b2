use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::stats::{mean_std, ols, ols_inference};

use super::CausalityError;

/// Asymptotic 5% critical value of the Dickey-Fuller t statistic for the
/// constant-only regression.
pub const ADF_CRIT_5PCT: f64 = -2.86;

/// Which causal direction(s) pass the significance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    XToY,
    YToX,
    Both,
    None,
}

impl Direction {
    /// Stable CSV token for the relation column.
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::XToY => "x_to_y",
            Direction::YToX => "y_to_x",
            Direction::Both => "both",
            Direction::None => "none",
        }
    }
}

/// One direction of a Granger test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionStat {
    pub f_stat: f64,
    pub p_value: f64,
    /// BIC-chosen autoregressive order.
    pub lag: usize,
    /// Observations entering the final regressions.
    pub n_used: usize,
}

/// Two-directional Granger test outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    pub direction: Direction,
    pub x_to_y: DirectionStat,
    pub y_to_x: DirectionStat,
    /// True when a failed stationarity pre-check forced first differences.
    pub differenced: bool,
}

/// Granger causality between two aligned daily series.
///
/// An augmented Dickey-Fuller pre-check (constant-only, one augmentation
/// lag, 5% critical value) runs on both series; if either looks
/// nonstationary, both are first-differenced before testing. Lag order is
/// chosen by BIC on the restricted autoregression, then lagged terms of
/// the other series are added and their joint nullity is F-tested via
/// restricted/unrestricted residual sums of squares. Identical inputs
/// short-circuit to a both-direction result with p = 0, the perfect
/// predictability limit.
pub fn granger_test(
    x: &[f64],
    y: &[f64],
    max_lag: usize,
    alpha: f64,
) -> Result<GrangerResult, CausalityError> {
    if max_lag == 0 {
        return Err(CausalityError::InvalidParams("max_lag must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CausalityError::InvalidParams(format!("alpha {alpha} outside (0, 1)")));
    }
    if x.len() != y.len() {
        return Err(CausalityError::Misaligned(format!(
            "{} x observations vs {} y observations",
            x.len(),
            y.len()
        )));
    }
    let needed = 10 * max_lag;
    if x.len() < needed {
        return Err(CausalityError::TooShort { needed, got: x.len() });
    }
    check_variance(x, "x")?;
    check_variance(y, "y")?;

    if x == y {
        let stat = DirectionStat { f_stat: f64::INFINITY, p_value: 0.0, lag: 1, n_used: x.len() - 1 };
        return Ok(GrangerResult { direction: Direction::Both, x_to_y: stat, y_to_x: stat, differenced: false });
    }

    let differenced = !adf_is_stationary(x)? || !adf_is_stationary(y)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = if differenced {
        (diff(x), diff(y))
    } else {
        (x.to_vec(), y.to_vec())
    };
    // Differencing a near-constant series can drain its variance.
    check_variance(&xs, "x (differenced)")?;
    check_variance(&ys, "y (differenced)")?;

    let x_to_y = one_direction(&xs, &ys, max_lag)?;
    let y_to_x = one_direction(&ys, &xs, max_lag)?;
    let direction = match (x_to_y.p_value < alpha, y_to_x.p_value < alpha) {
        (true, true) => Direction::Both,
        (true, false) => Direction::XToY,
        (false, true) => Direction::YToX,
        (false, false) => Direction::None,
    };
    Ok(GrangerResult { direction, x_to_y, y_to_x, differenced })
}

fn check_variance(v: &[f64], name: &str) -> Result<(), CausalityError> {
    let (_, sd) = mean_std(v);
    if sd == 0.0 {
        return Err(CausalityError::ConstantSeries(name.to_string()));
    }
    Ok(())
}

fn diff(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Constant-only ADF with one augmentation lag: regress dy_t on
/// [1, y_{t-1}, dy_{t-1}] and compare the y_{t-1} t statistic against the
/// 5% critical value. True = stationary (unit root rejected).
fn adf_is_stationary(v: &[f64]) -> Result<bool, CausalityError> {
    let n = v.len();
    let dv = diff(v);
    // Rows t = 2..n of the original indexing.
    let m = n - 2;
    let ones = vec![1.0; m];
    let lag_level: Vec<f64> = v[1..n - 1].to_vec();
    let lag_diff: Vec<f64> = dv[..m].to_vec();
    let target: Vec<f64> = dv[1..].to_vec();
    let cols = vec![ones, lag_level, lag_diff];
    let (beta, rss, diag) =
        ols_inference(&cols, &target).ok_or(CausalityError::SingularRegression)?;
    let dof = m.saturating_sub(3).max(1) as f64;
    let sigma2 = rss / dof;
    let se = (sigma2 * diag[1]).sqrt();
    if se == 0.0 {
        // Perfect fit: gamma is exact; any negative drift is stationary.
        return Ok(beta[1] < 0.0);
    }
    Ok(beta[1] / se < ADF_CRIT_5PCT)
}

/// F-test of "lags of `cause` add nothing" for predicting `effect`.
fn one_direction(
    cause: &[f64],
    effect: &[f64],
    max_lag: usize,
) -> Result<DirectionStat, CausalityError> {
    let n = effect.len();

    // Lag order by BIC on the restricted model, common sample across
    // candidates so the criteria are comparable.
    let common = n - max_lag;
    let mut best = (f64::INFINITY, 1usize);
    for p in 1..=max_lag {
        let mut cols = vec![vec![1.0; common]];
        for l in 1..=p {
            cols.push((max_lag..n).map(|t| effect[t - l]).collect());
        }
        let target: Vec<f64> = effect[max_lag..].to_vec();
        let (_, rss) = ols(&cols, &target);
        let mf = common as f64;
        let bic = mf * (rss / mf).max(f64::MIN_POSITIVE).ln() + (p as f64 + 1.0) * mf.ln();
        if bic < best.0 {
            best = (bic, p);
        }
    }
    let p_star = best.1;

    // Final regressions on the widest sample the chosen order allows.
    let m = n - p_star;
    let target: Vec<f64> = effect[p_star..].to_vec();
    let mut restricted = vec![vec![1.0; m]];
    for l in 1..=p_star {
        restricted.push((p_star..n).map(|t| effect[t - l]).collect());
    }
    let mut unrestricted = restricted.clone();
    for l in 1..=p_star {
        unrestricted.push((p_star..n).map(|t| cause[t - l]).collect());
    }
    let (_, ssr_r) = ols(&restricted, &target);
    let (_, ssr_u) = ols(&unrestricted, &target);

    let tsd = mean_std(&target).1;
    let sst = tsd * tsd * m as f64;
    let df_denom = m as f64 - 2.0 * p_star as f64 - 1.0;
    if df_denom < 1.0 {
        return Err(CausalityError::TooShort { needed: 2 * p_star + 2, got: m });
    }
    // Perfect predictability limit: the unrestricted model explains
    // everything, so the improvement ratio diverges.
    if ssr_u <= 1e-12 * sst.max(f64::MIN_POSITIVE) {
        return Ok(DirectionStat { f_stat: f64::INFINITY, p_value: 0.0, lag: p_star, n_used: m });
    }
    let f_stat = ((ssr_r - ssr_u).max(0.0) / p_star as f64) / (ssr_u / df_denom);
    let dist = FisherSnedecor::new(p_star as f64, df_denom)
        .map_err(|_| CausalityError::SingularRegression)?;
    let p_value = 1.0 - dist.cdf(f_stat);
    Ok(DirectionStat { f_stat, p_value, lag: p_star, n_used: m })
}
