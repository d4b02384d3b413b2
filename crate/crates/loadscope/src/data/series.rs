use chrono::{DateTime, Datelike, Duration, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::DataError;

/// A label-tagged hourly series with a uniform 1-hour step, stored as a
/// start instant plus contiguous values. Used for city temperatures and as
/// the backing store of [`HourlyDemandSeries`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlySeries {
    label: String,
    start: DateTime<Utc>,
    values: Vec<f64>,
}

impl HourlySeries {
    /// `start` must fall on a whole hour; all values must be finite.
    pub fn new(label: impl Into<String>, start: DateTime<Utc>, values: Vec<f64>) -> Result<Self, DataError> {
        let label = label.into();
        if start.minute() != 0 || start.second() != 0 || start.nanosecond() != 0 {
            return Err(DataError::InvalidSeries {
                name: label,
                reason: "start instant is not on a whole hour".into(),
            });
        }
        if values.is_empty() {
            return Err(DataError::InvalidSeries { name: label, reason: "empty series".into() });
        }
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite { column: label, row });
        }
        Ok(Self { label, start, values })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamp(&self, idx: usize) -> DateTime<Utc> {
        self.start + Duration::hours(idx as i64)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.values.len() - 1)
    }

    /// Value at the given UTC date and hour-of-day, if covered.
    pub fn value_at(&self, date: NaiveDate, hour: u32) -> Option<f64> {
        let instant = date.and_hms_opt(hour, 0, 0)?.and_utc();
        let offset = (instant - self.start).num_hours();
        if offset < 0 || instant.timestamp() % 3600 != self.start.timestamp() % 3600 {
            return None;
        }
        self.values.get(offset as usize).copied()
    }

    /// The 24 hourly values of a UTC calendar day, if fully covered.
    pub fn day_profile(&self, date: NaiveDate) -> Option<[f64; 24]> {
        let midnight = date.and_hms_opt(0, 0, 0)?.and_utc();
        let offset = (midnight - self.start).num_hours();
        if offset < 0 {
            return None;
        }
        let offset = offset as usize;
        if offset + 24 > self.values.len() {
            return None;
        }
        let mut out = [0.0; 24];
        out.copy_from_slice(&self.values[offset..offset + 24]);
        Some(out)
    }

    /// First UTC date whose 24 hours are all covered.
    pub fn first_full_day(&self) -> Option<NaiveDate> {
        let mut d = self.start.date_naive();
        if self.start.hour() != 0 {
            d = d.succ_opt()?;
        }
        if self.day_profile(d).is_some() {
            Some(d)
        } else {
            None
        }
    }

    /// Last UTC date whose 24 hours are all covered.
    pub fn last_full_day(&self) -> Option<NaiveDate> {
        let end = self.end();
        let mut d = end.date_naive();
        if end.hour() != 23 {
            d = d.pred_opt()?;
        }
        if self.day_profile(d).is_some() {
            Some(d)
        } else {
            None
        }
    }

    /// Mean over all covered hours falling in `month` at hour-of-day `hour`,
    /// restricted to dates in `[from, to]`.
    pub fn month_hour_mean(&self, month: u32, hour: u32, from: NaiveDate, to: NaiveDate) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, v) in self.values.iter().enumerate() {
            let ts = self.timestamp(i);
            let d = ts.date_naive();
            if d < from || d > to {
                continue;
            }
            if d.month() == month && ts.hour() == hour {
                sum += v;
                n += 1;
            }
        }
        if n == 0 {
            None
        } else {
            Some(sum / n as f64)
        }
    }
}

/// Region-tagged hourly electricity demand in MW: the forecast target.
///
/// On top of [`HourlySeries`], demands must be strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyDemandSeries(HourlySeries);

impl HourlyDemandSeries {
    pub fn new(region: impl Into<String>, start: DateTime<Utc>, values: Vec<f64>) -> Result<Self, DataError> {
        Self::from_series(HourlySeries::new(region, start, values)?)
    }

    /// Wrap an already-built hourly series, enforcing positive demand.
    pub fn from_series(inner: HourlySeries) -> Result<Self, DataError> {
        if let Some(row) = inner.values().iter().position(|&v| v <= 0.0) {
            return Err(DataError::InvalidSeries {
                name: inner.label().to_string(),
                reason: format!("demand must be > 0 MW, found {} at index {row}", inner.values()[row]),
            });
        }
        Ok(Self(inner))
    }

    pub fn region(&self) -> &str {
        self.0.label()
    }

    pub fn series(&self) -> &HourlySeries {
        &self.0
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.0.start()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn day_profile(&self, date: NaiveDate) -> Option<[f64; 24]> {
        self.0.day_profile(date)
    }

    pub fn first_full_day(&self) -> Option<NaiveDate> {
        self.0.first_full_day()
    }

    pub fn last_full_day(&self) -> Option<NaiveDate> {
        self.0.last_full_day()
    }
}

/// A date-indexed daily real series (textual centroid, economic indicator).
/// Daily step with no missing values; dates derived from `start + index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyFeatureSeries {
    name: String,
    start: NaiveDate,
    values: Vec<f64>,
}

impl DailyFeatureSeries {
    pub fn new(name: impl Into<String>, start: NaiveDate, values: Vec<f64>) -> Result<Self, DataError> {
        let name = name.into();
        if values.is_empty() {
            return Err(DataError::InvalidSeries { name, reason: "empty series".into() });
        }
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite { column: name, row });
        }
        Ok(Self { name, start, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(self.values.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn date(&self, idx: usize) -> NaiveDate {
        self.start + Duration::days(idx as i64)
    }

    pub fn value_on(&self, date: NaiveDate) -> Option<f64> {
        let offset = (date - self.start).num_days();
        if offset < 0 {
            return None;
        }
        self.values.get(offset as usize).copied()
    }

    /// Trailing mean of the `window` values ending on `date` (inclusive).
    /// Falls back to however much history exists if the window extends
    /// before the series start.
    pub fn trailing_mean(&self, date: NaiveDate, window: usize) -> Option<f64> {
        let offset = (date - self.start).num_days();
        if offset < 0 || offset as usize >= self.values.len() {
            return None;
        }
        let end = offset as usize + 1;
        let begin = end.saturating_sub(window.max(1));
        Some(self.values[begin..end].iter().sum::<f64>() / (end - begin) as f64)
    }

    /// Subrange `[from, to]` as a new series; `None` unless fully covered.
    pub fn slice(&self, from: NaiveDate, to: NaiveDate) -> Option<Self> {
        let a = (from - self.start).num_days();
        let b = (to - self.start).num_days();
        if a < 0 || b < a || b as usize >= self.values.len() {
            return None;
        }
        Some(Self {
            name: self.name.clone(),
            start: from,
            values: self.values[a as usize..=b as usize].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utc(y: i32, m: u32, d: u32, h: u32) -> DateTime<Utc> {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, 0, 0).unwrap().and_utc()
    }

    #[test]
    fn demand_rejects_nonpositive_values() {
        let err = HourlyDemandSeries::new("r", utc(2023, 1, 1, 0), vec![1.0, 0.0]);
        assert!(err.is_err());
        let err = HourlySeries::new("r", utc(2023, 1, 1, 0), vec![1.0, f64::NAN]);
        assert!(matches!(err, Err(DataError::NonFinite { row: 1, .. })));
    }

    #[test]
    fn day_profile_and_full_day_bounds() {
        // 2023-01-01T06:00 .. 2023-01-03T10:00
        let n = 24 * 2 + 5;
        let s = HourlySeries::new("r", utc(2023, 1, 1, 6), (0..n).map(|i| i as f64).collect()).unwrap();
        assert_eq!(s.first_full_day(), Some(NaiveDate::from_ymd_opt(2023, 1, 2).unwrap()));
        assert_eq!(s.last_full_day(), Some(NaiveDate::from_ymd_opt(2023, 1, 2).unwrap()));
        let profile = s.day_profile(NaiveDate::from_ymd_opt(2023, 1, 2).unwrap()).unwrap();
        assert_eq!(profile[0], 18.0);
        assert_eq!(profile[23], 41.0);
        assert!(s.day_profile(NaiveDate::from_ymd_opt(2023, 1, 3).unwrap()).is_none());
    }

    #[test]
    fn daily_series_lookup_and_trailing_mean() {
        let d0 = NaiveDate::from_ymd_opt(2023, 3, 1).unwrap();
        let s = DailyFeatureSeries::new("f", d0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.value_on(d0 + Duration::days(2)), Some(3.0));
        assert_eq!(s.value_on(d0 - Duration::days(1)), None);
        assert_eq!(s.trailing_mean(d0 + Duration::days(3), 2), Some(3.5));
        assert_eq!(s.trailing_mean(d0, 5), Some(1.0));
    }
}
