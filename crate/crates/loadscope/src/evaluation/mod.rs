//! Deterministic and probabilistic forecast scoring, improvement tables,
//! and multi-task model ranking.

mod crps;
mod ranking;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::HOURS;

pub use crps::{crps_batch, crps_gaussian};
pub use ranking::{friedman_nemenyi, FriedmanResult};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
    #[error("truth is zero at day {day}, hour {hour}; MAPE undefined")]
    ZeroTruth { day: usize, hour: usize },
    #[error("sigma must be positive, got {sigma} at index {index}")]
    NonPositiveSigma { index: usize, sigma: f64 },
    #[error("score tables disagree: {0}")]
    KeyMismatch(String),
    #[error("ranking needs at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("ranking needs at least 2 tasks, got {0}")]
    TooFewTasks(usize),
    #[error("no critical-difference table for alpha = {0}; use 0.05 or 0.10")]
    UnsupportedAlpha(f64),
    #[error("ranking supports at most 10 models, got {0}")]
    TooManyModels(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(String),
}

/// Point-forecast accuracy in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointScores {
    pub rmse_mw: f64,
    pub mape_pct: f64,
}

/// Score truth vs forecast over aligned day-by-24 blocks.
///
/// RMSE is computed per day over its 24 hours, then averaged across days;
/// MAPE averages |error/truth| over every day-hour. Zero truth anywhere
/// makes MAPE undefined and is an error rather than a silent skip.
pub fn evaluate_point(
    truth: &[[f64; HOURS]],
    forecast: &[[f64; HOURS]],
) -> Result<PointScores, EvalError> {
    if truth.is_empty() || truth.len() != forecast.len() {
        return Err(EvalError::Misaligned(format!(
            "{} truth days vs {} forecast days",
            truth.len(),
            forecast.len()
        )));
    }
    let mut rmse_sum = 0.0;
    let mut ape_sum = 0.0;
    for (d, (t_day, f_day)) in truth.iter().zip(forecast).enumerate() {
        let mut sse = 0.0;
        for h in 0..HOURS {
            if t_day[h] == 0.0 {
                return Err(EvalError::ZeroTruth { day: d, hour: h });
            }
            let e = t_day[h] - f_day[h];
            sse += e * e;
            ape_sum += (e / t_day[h]).abs();
        }
        rmse_sum += (sse / HOURS as f64).sqrt();
    }
    let n_days = truth.len() as f64;
    Ok(PointScores {
        rmse_mw: rmse_sum / n_days,
        mape_pct: 100.0 * ape_sum / (n_days * HOURS as f64),
    })
}

/// One scored (region, horizon, model) cell. `crps_mw` is absent for
/// point-only models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub region: String,
    pub horizon: u32,
    pub model: String,
    pub rmse_mw: f64,
    pub mape_pct: f64,
    pub crps_mw: Option<f64>,
}

/// Collection of score rows; the run's central results table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: ScoreRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn get(&self, region: &str, horizon: u32, model: &str) -> Option<&ScoreRow> {
        self.rows
            .iter()
            .find(|r| r.region == region && r.horizon == horizon && r.model == model)
    }

    pub fn models(&self) -> Vec<String> {
        let mut out: Vec<String> = self.rows.iter().map(|r| r.model.clone()).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Rows for one model, sorted by (region, horizon).
    pub fn for_model(&self, model: &str) -> Vec<&ScoreRow> {
        let mut out: Vec<&ScoreRow> = self.rows.iter().filter(|r| r.model == model).collect();
        out.sort_by(|a, b| a.region.cmp(&b.region).then(a.horizon.cmp(&b.horizon)));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| EvalError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        })?;
        for row in &self.rows {
            w.serialize(row).map_err(|e| EvalError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|source| EvalError::Io { path: path.display().to_string(), source })
    }
}

/// Horizon buckets used for weekly improvement aggregation.
pub const WEEK_GROUPS: [(&str, u32, u32); 4] =
    [("1-7", 1, 7), ("8-14", 8, 14), ("15-21", 15, 21), ("22-30", 22, 30)];

/// One aggregated improvement cell: how much `variant` improves on `base`
/// for a metric, averaged over the horizons of a weekly group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub region: String,
    pub horizon_group: String,
    pub metric: String,
    pub base_model: String,
    pub variant_model: String,
    pub improvement_pct: f64,
}

/// Percentage improvement of `variant` over `base`, per metric, averaged
/// within weekly horizon groups.
///
/// Both tables must hold exactly one model each and cover identical
/// (region, horizon) keys. A positive value means the variant scores
/// lower (better). CRPS rows appear only where both sides report CRPS.
pub fn improvement_table(
    base: &ScoreTable,
    variant: &ScoreTable,
) -> Result<Vec<ImprovementRow>, EvalError> {
    let one_model = |t: &ScoreTable, which: &str| -> Result<String, EvalError> {
        let models = t.models();
        if models.len() != 1 {
            return Err(EvalError::KeyMismatch(format!(
                "{which} table must hold exactly one model, found {models:?}"
            )));
        }
        Ok(models.into_iter().next().unwrap())
    };
    let base_model = one_model(base, "base")?;
    let variant_model = one_model(variant, "variant")?;
    if base.rows.len() != variant.rows.len() {
        return Err(EvalError::KeyMismatch(format!(
            "{} base rows vs {} variant rows",
            base.rows.len(),
            variant.rows.len()
        )));
    }

    let mut out = Vec::new();
    let mut regions: Vec<&str> = base.rows.iter().map(|r| r.region.as_str()).collect();
    regions.sort();
    regions.dedup();

    for region in regions {
        for (group, lo, hi) in WEEK_GROUPS {
            // Per-horizon improvements first, then the group mean.
            let mut cells: Vec<(&str, Vec<f64>)> =
                vec![("rmse_mw", Vec::new()), ("mape_pct", Vec::new()), ("crps_mw", Vec::new())];
            for b in base
                .rows
                .iter()
                .filter(|r| r.region == region && (lo..=hi).contains(&r.horizon))
            {
                let v = variant.get(region, b.horizon, &variant_model).ok_or_else(|| {
                    EvalError::KeyMismatch(format!(
                        "variant missing ({region}, horizon {})",
                        b.horizon
                    ))
                })?;
                let pct = |bv: f64, vv: f64| 100.0 * (bv - vv) / bv;
                cells[0].1.push(pct(b.rmse_mw, v.rmse_mw));
                cells[1].1.push(pct(b.mape_pct, v.mape_pct));
                if let (Some(bc), Some(vc)) = (b.crps_mw, v.crps_mw) {
                    cells[2].1.push(pct(bc, vc));
                }
            }
            for (metric, vals) in cells {
                if vals.is_empty() {
                    continue;
                }
                out.push(ImprovementRow {
                    region: region.to_string(),
                    horizon_group: group.to_string(),
                    metric: metric.to_string(),
                    base_model: base_model.clone(),
                    variant_model: variant_model.clone(),
                    improvement_pct: vals.iter().sum::<f64>() / vals.len() as f64,
                });
            }
        }
    }
    Ok(out)
}

/// Write improvement rows as CSV.
pub fn write_improvements(rows: &[ImprovementRow], path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })?;
    for row in rows {
        w.serialize(row).map_err(|e| EvalError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|source| EvalError::Io { path: path.display().to_string(), source })
}
