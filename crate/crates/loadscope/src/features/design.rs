use chrono::{Datelike, Days, NaiveDate};

use crate::data::{DateRange, DesignMatrix, Table};
use crate::data::{DailyFeatureSeries, HOURS};
use crate::ingest::AlignedPanel;

use super::{Climatology, FeatureError, FeatureSpec};

/// Number of holiday dummy columns; the sorted distinct holiday names are
/// padded or truncated to this many classes.
pub const HOLIDAY_CLASSES: usize = 12;

/// Base column count: 24 demand lags + weekend flag + 12 holiday dummies +
/// 4 cyclic calendar encodings + 24 climatological temperatures.
pub const BASE_COLUMNS: usize = HOURS + 1 + HOLIDAY_CLASSES + 4 + HOURS;

/// Assemble the supervised table for one (region, horizon) pair.
///
/// Rows are issue days `d` with a fully observed demand day at `d` (for the
/// lags) and at `d + horizon` (for the target). Columns, in order:
/// 24 hourly demands of day `d`; weekend flag, 12 holiday dummies, and
/// sin/cos of day-of-week and day-of-year for the target day; 24
/// climatological temperatures for the target day; then optionally the
/// 3 economic indicators and the social-factor centroids, both at their
/// latest value as of `d`.
///
/// `train` is the range behind the static statistics (climatology); it also
/// stamps the matrix's static-source cutoff.
pub fn build_design_matrix(
    panel: &AlignedPanel,
    region: &str,
    horizon: usize,
    spec: &FeatureSpec,
    centroids: &[DailyFeatureSeries],
    train: DateRange,
) -> Result<DesignMatrix, FeatureError> {
    spec.validate()?;
    let demand = panel
        .demand(region)
        .ok_or_else(|| FeatureError::UnknownRegion(region.to_string()))?;
    let temps = panel
        .temperature_for_region(region)
        .ok_or_else(|| FeatureError::UnknownRegion(region.to_string()))?;
    if spec.use_social && centroids.is_empty() {
        return Err(FeatureError::MissingCentroids);
    }
    let climatology = Climatology::fit(temps, train);

    let mut classes = panel.holiday_names();
    classes.truncate(HOLIDAY_CLASSES);
    while classes.len() < HOLIDAY_CLASSES {
        classes.push(format!("unused_{}", classes.len()));
    }

    let mut names = Vec::with_capacity(BASE_COLUMNS + 3 + centroids.len());
    for h in 0..HOURS {
        names.push(format!("lag_h{h:02}"));
    }
    names.push("is_weekend".into());
    for (i, class) in classes.iter().enumerate() {
        names.push(format!("hol_{i:02}_{class}"));
    }
    names.extend(["dow_sin", "dow_cos", "doy_sin", "doy_cos"].map(String::from));
    for h in 0..HOURS {
        names.push(format!("clim_h{h:02}"));
    }
    if spec.use_economics {
        for e in panel.economics() {
            names.push(e.name().to_string());
        }
    }
    if spec.use_social {
        for c in centroids {
            names.push(c.name().to_string());
        }
    }

    let first = demand.first_full_day();
    let last = demand.last_full_day();
    let (Some(first), Some(last)) = (first, last) else {
        return Err(FeatureError::Data(crate::data::DataError::InvalidSeries {
            name: region.to_string(),
            reason: "demand series has no fully observed day".into(),
        }));
    };

    let mut cols = vec![Vec::new(); names.len()];
    let mut dates = Vec::new();
    let mut targets = Vec::new();
    let mut provenance = Vec::new();
    let mut d = first;
    let tau = std::f64::consts::TAU;
    while d + Days::new(horizon as u64) <= last {
        let target_day = d + Days::new(horizon as u64);
        let (Some(lags), Some(target)) = (demand.day_profile(d), demand.day_profile(target_day))
        else {
            d = d.succ_opt().expect("bounded");
            continue;
        };

        let mut row = Vec::with_capacity(names.len());
        row.extend_from_slice(&lags);
        row.push(if is_weekend(target_day) { 1.0 } else { 0.0 });
        for class in &classes {
            let hit = panel
                .holidays()
                .contains(&(region.to_string(), target_day, class.clone()));
            row.push(if hit { 1.0 } else { 0.0 });
        }
        let dow = target_day.weekday().num_days_from_monday() as f64;
        let doy = target_day.ordinal() as f64;
        row.push((tau * dow / 7.0).sin());
        row.push((tau * dow / 7.0).cos());
        row.push((tau * doy / 365.25).sin());
        row.push((tau * doy / 365.25).cos());
        for h in 0..HOURS {
            row.push(climatology.value(target_day.month(), h as u32)?);
        }
        if spec.use_economics {
            for e in panel.economics() {
                row.push(e.value_on(d).ok_or(FeatureError::InsufficientHistory(d))?);
            }
        }
        if spec.use_social {
            for c in centroids {
                let v = if spec.text_smoothing_window > 1 {
                    c.trailing_mean(d, spec.text_smoothing_window)
                } else {
                    c.value_on(d)
                };
                row.push(v.ok_or(FeatureError::InsufficientHistory(d))?);
            }
        }

        for (col, v) in cols.iter_mut().zip(row) {
            col.push(v);
        }
        dates.push(d);
        targets.push(target);
        provenance.push(d);
        d = d.succ_opt().expect("bounded");
    }

    let features = Table::new(names, cols).map_err(FeatureError::Data)?;
    DesignMatrix::new(region, horizon, dates, features, targets, provenance, train.end())
        .map_err(FeatureError::Data)
}

fn is_weekend(date: NaiveDate) -> bool {
    date.weekday().num_days_from_monday() >= 5
}
