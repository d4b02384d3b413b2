use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DataError, Table};

/// Hours per target day; every daily target and forecast is a 24-vector.
pub const HOURS: usize = 24;

/// Per-(region, horizon) supervised learning table.
///
/// Each row corresponds to an issue day `d`: the features may only draw on
/// data dated `<= d`, and the target is the 24 hourly demands of day `d + h`.
/// The leakage guard is enforced structurally: every row carries the latest
/// source-data date that went into its dynamic features (`provenance`), and
/// construction fails if any row's provenance exceeds its issue date.
///
/// Features derived from whole-training-range statistics (climatological
/// temperatures, standardization constants) are covered by
/// `static_sources_end`, the last day of the range those statistics were
/// fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    region: String,
    horizon: usize,
    issue_dates: Vec<NaiveDate>,
    features: Table,
    targets: Vec<[f64; HOURS]>,
    provenance: Vec<NaiveDate>,
    static_sources_end: NaiveDate,
}

impl DesignMatrix {
    pub fn new(
        region: impl Into<String>,
        horizon: usize,
        issue_dates: Vec<NaiveDate>,
        features: Table,
        targets: Vec<[f64; HOURS]>,
        provenance: Vec<NaiveDate>,
        static_sources_end: NaiveDate,
    ) -> Result<Self, DataError> {
        if !(1..=30).contains(&horizon) {
            return Err(DataError::ShapeMismatch(format!(
                "horizon {horizon} outside supported range 1..=30"
            )));
        }
        let n = issue_dates.len();
        if features.n_rows() != n || targets.len() != n || provenance.len() != n {
            return Err(DataError::ShapeMismatch(format!(
                "rows disagree: {} dates, {} feature rows, {} targets, {} provenance entries",
                n,
                features.n_rows(),
                targets.len(),
                provenance.len()
            )));
        }
        if let Some(w) = issue_dates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(DataError::ShapeMismatch(format!(
                "issue dates not strictly increasing at row {}",
                w + 1
            )));
        }
        if let Some((column, row)) = features.find_non_finite() {
            return Err(DataError::NonFinite { column, row });
        }
        for (row, t) in targets.iter().enumerate() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { column: "<target>".into(), row });
            }
        }
        for (row, (&src, &issue)) in provenance.iter().zip(&issue_dates).enumerate() {
            if src > issue {
                return Err(DataError::LeakageViolation { row, source_date: src, issue });
            }
        }
        Ok(Self {
            region: region.into(),
            horizon,
            issue_dates,
            features,
            targets,
            provenance,
            static_sources_end,
        })
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_rows(&self) -> usize {
        self.issue_dates.len()
    }

    pub fn issue_dates(&self) -> &[NaiveDate] {
        &self.issue_dates
    }

    /// Calendar day the row's target covers: issue date + horizon.
    pub fn target_date(&self, row: usize) -> NaiveDate {
        self.issue_dates[row] + chrono::Days::new(self.horizon as u64)
    }

    pub fn features(&self) -> &Table {
        &self.features
    }

    pub fn targets(&self) -> &[[f64; HOURS]] {
        &self.targets
    }

    /// One hour's targets across all rows, as a training label vector.
    pub fn target_hour(&self, hour: usize) -> Vec<f64> {
        self.targets.iter().map(|t| t[hour]).collect()
    }

    pub fn provenance(&self) -> &[NaiveDate] {
        &self.provenance
    }

    pub fn static_sources_end(&self) -> NaiveDate {
        self.static_sources_end
    }

    /// Row-subset copy preserving all invariants. Indices must be strictly
    /// increasing (keeps issue dates ordered).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, DataError> {
        if rows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DataError::ShapeMismatch("row selection must be strictly increasing".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows()) {
            return Err(DataError::ShapeMismatch(format!(
                "row {bad} out of bounds for {} rows",
                self.n_rows()
            )));
        }
        Ok(Self {
            region: self.region.clone(),
            horizon: self.horizon,
            issue_dates: rows.iter().map(|&r| self.issue_dates[r]).collect(),
            features: self.features.select_rows(rows),
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
            provenance: rows.iter().map(|&r| self.provenance[r]).collect(),
            static_sources_end: self.static_sources_end,
        })
    }

    /// Replace the feature table (e.g. after standardization). The new table
    /// must keep the same row count.
    pub fn with_features(&self, features: Table) -> Result<Self, DataError> {
        if features.n_rows() != self.n_rows() {
            return Err(DataError::ShapeMismatch(format!(
                "replacement features have {} rows, matrix has {}",
                features.n_rows(),
                self.n_rows()
            )));
        }
        let mut out = self.clone();
        out.features = features;
        Ok(out)
    }
}

/// Point forecasts for a sequence of target days, 24 hourly values each, MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointForecastSet {
    pub model: String,
    pub region: String,
    pub horizon: usize,
    pub days: Vec<NaiveDate>,
    pub values: Vec<[f64; HOURS]>,
}

impl PointForecastSet {
    pub fn new(
        model: impl Into<String>,
        region: impl Into<String>,
        horizon: usize,
        days: Vec<NaiveDate>,
        values: Vec<[f64; HOURS]>,
    ) -> Result<Self, DataError> {
        if days.len() != values.len() {
            return Err(DataError::ShapeMismatch(format!(
                "{} days but {} forecast rows",
                days.len(),
                values.len()
            )));
        }
        for (row, v) in values.iter().enumerate() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(DataError::NonFinite { column: "<forecast>".into(), row });
            }
        }
        Ok(Self { model: model.into(), region: region.into(), horizon, days, values })
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}

/// Gaussian forecasts: per (day, hour) a mean and standard deviation in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbForecastSet {
    pub model: String,
    pub region: String,
    pub horizon: usize,
    pub days: Vec<NaiveDate>,
    pub mu: Vec<[f64; HOURS]>,
    pub sigma: Vec<[f64; HOURS]>,
}

impl ProbForecastSet {
    pub fn new(
        model: impl Into<String>,
        region: impl Into<String>,
        horizon: usize,
        days: Vec<NaiveDate>,
        mu: Vec<[f64; HOURS]>,
        sigma: Vec<[f64; HOURS]>,
    ) -> Result<Self, DataError> {
        if days.len() != mu.len() || days.len() != sigma.len() {
            return Err(DataError::ShapeMismatch(format!(
                "{} days, {} mu rows, {} sigma rows",
                days.len(),
                mu.len(),
                sigma.len()
            )));
        }
        for (row, m) in mu.iter().enumerate() {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(DataError::NonFinite { column: "<mu>".into(), row });
            }
        }
        for (row, s) in sigma.iter().enumerate() {
            for (hour, &x) in s.iter().enumerate() {
                if !x.is_finite() || x <= 0.0 {
                    return Err(DataError::NonPositiveSigma { day: days[row], hour });
                }
            }
        }
        Ok(Self { model: model.into(), region: region.into(), horizon, days, mu, sigma })
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Drop the spread, keeping the means as a point forecast.
    pub fn to_point(&self) -> PointForecastSet {
        PointForecastSet {
            model: self.model.clone(),
            region: self.region.clone(),
            horizon: self.horizon,
            days: self.days.clone(),
            values: self.mu.clone(),
        }
    }
}
