//! Reference forecasters: profile persistence, monthly climatology, their
//! learned weighted combination, and a from-scratch LASSO regressor.

mod combine;
mod lasso;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::data::{DataError, DateRange, HOURS};
use crate::ingest::AlignedPanel;

pub use combine::{combine_pf_scf, PfScfModel, PF_SCF_LAMBDA_GRID};
pub use lasso::{lasso_fit, LassoModel};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("region {0} not present in the panel")]
    UnknownRegion(String),
    #[error("day {0} is not fully observed")]
    MissingDay(NaiveDate),
    #[error("no training observations for month {month}")]
    NoHistory { month: u32 },
    #[error("horizon {0} outside 1..=30")]
    InvalidHorizon(u32),
    #[error("coordinate descent did not converge within {max_iter} sweeps")]
    NotConverged { max_iter: usize },
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Persistence forecast: the target day `issue + horizon` is predicted to
/// repeat the full 24-hour demand profile of the issue day. The horizon
/// affects which day the forecast is scored against, never its values.
pub fn persistence_forecast(
    panel: &AlignedPanel,
    region: &str,
    issue: NaiveDate,
    horizon: u32,
) -> Result<[f64; HOURS], BaselineError> {
    if !(1..=30).contains(&horizon) {
        return Err(BaselineError::InvalidHorizon(horizon));
    }
    let demand = panel
        .demand(region)
        .ok_or_else(|| BaselineError::UnknownRegion(region.to_string()))?;
    demand.day_profile(issue).ok_or(BaselineError::MissingDay(issue))
}

/// Smart climatology forecast: each hour of the target day is predicted by
/// the mean training demand at (month of target, hour), pooling that month
/// across every training year. A target month the training range never
/// visited borrows the nearest visited month (circular calendar distance,
/// backward probe first); the forecast errors only when no month has
/// training data.
pub fn climatology_forecast(
    panel: &AlignedPanel,
    region: &str,
    target: NaiveDate,
    train: &DateRange,
) -> Result<[f64; HOURS], BaselineError> {
    let demand = panel
        .demand(region)
        .ok_or_else(|| BaselineError::UnknownRegion(region.to_string()))?;
    let month = target.month();
    let mean = |m: u32, h: usize| {
        demand.series().month_hour_mean(m, h as u32, train.start(), train.end())
    };
    let mut out = [0.0; HOURS];
    for (h, slot) in out.iter_mut().enumerate() {
        let value = mean(month, h).or_else(|| {
            (1..=6u32).find_map(|dist| {
                [(month + 12 - dist - 1) % 12 + 1, (month + dist - 1) % 12 + 1]
                    .into_iter()
                    .find_map(|m| mean(m, h))
            })
        });
        *slot = value.ok_or(BaselineError::NoHistory { month })?;
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod test_panel {
    use std::collections::{BTreeMap, BTreeSet};

    use chrono::{NaiveDate, TimeZone, Utc};

    use crate::data::{HourlyDemandSeries, HourlySeries};
    use crate::ingest::AlignedPanel;

    /// One-region panel whose demand on day index d, hour h is
    /// `profile(d)[h]`; temperature is a flat 10 C.
    pub fn panel_from_profiles(
        start: NaiveDate,
        profiles: &[[f64; 24]],
    ) -> AlignedPanel {
        let t0 = Utc.from_utc_datetime(&start.and_hms_opt(0, 0, 0).unwrap());
        let demand: Vec<f64> = profiles.iter().flatten().copied().collect();
        let temps = vec![10.0; demand.len()];
        let mut demand_map = BTreeMap::new();
        demand_map.insert(
            "north".to_string(),
            HourlyDemandSeries::new("north", t0, demand).unwrap(),
        );
        let mut temp_map = BTreeMap::new();
        temp_map.insert("north_city".to_string(), HourlySeries::new("north_city", t0, temps).unwrap());
        let mut region_city = BTreeMap::new();
        region_city.insert("north".to_string(), "north_city".to_string());
        AlignedPanel::new(demand_map, temp_map, Vec::new(), Vec::new(), BTreeSet::new(), region_city, 0)
            .unwrap()
    }

    pub fn day(start: NaiveDate, offset: u64) -> NaiveDate {
        start + chrono::Days::new(offset)
    }
}

#[cfg(test)]
mod tests {
    use super::test_panel::{day, panel_from_profiles};
    use super::*;
    use chrono::NaiveDate;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 1).unwrap()
    }

    fn profile(level: f64) -> [f64; 24] {
        std::array::from_fn(|h| level + h as f64)
    }

    #[test]
    fn persistence_returns_issue_day_profile_for_any_horizon() {
        let profiles: Vec<[f64; 24]> = (0..10).map(|d| profile(100.0 + d as f64 * 5.0)).collect();
        let panel = panel_from_profiles(start(), &profiles);
        for h in [1, 7, 30] {
            let fc = persistence_forecast(&panel, "north", day(start(), 3), h).unwrap();
            assert_eq!(fc, profiles[3]);
        }
    }

    #[test]
    fn persistence_rejects_unknown_region_and_missing_day() {
        let panel = panel_from_profiles(start(), &[profile(100.0); 4]);
        assert!(matches!(
            persistence_forecast(&panel, "south", day(start(), 1), 1),
            Err(BaselineError::UnknownRegion(_))
        ));
        assert!(matches!(
            persistence_forecast(&panel, "north", day(start(), 40), 1),
            Err(BaselineError::MissingDay(_))
        ));
        assert!(matches!(
            persistence_forecast(&panel, "north", day(start(), 1), 0),
            Err(BaselineError::InvalidHorizon(0))
        ));
    }

    #[test]
    fn persistence_on_weekly_pattern_is_exact_at_weekly_horizon() {
        // Period-7 demand: persisting across a full week reproduces the
        // truth exactly, while a 3-day shift does not.
        let profiles: Vec<[f64; 24]> =
            (0..35).map(|d| profile(100.0 + 30.0 * (d % 7) as f64)).collect();
        let panel = panel_from_profiles(start(), &profiles);
        let sq_err = |h: u64| -> f64 {
            (7..14)
                .map(|d| {
                    let fc = persistence_forecast(&panel, "north", day(start(), d), h as u32)
                        .unwrap();
                    let truth = profiles[(d + h) as usize];
                    fc.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                })
                .sum()
        };
        assert_eq!(sq_err(7), 0.0);
        assert!(sq_err(3) > 0.0);
    }

    #[test]
    fn climatology_single_matching_day_returns_that_profile() {
        // Train range covers January only; a January target reproduces the
        // single January day.
        let profiles = vec![profile(200.0), profile(300.0)];
        let panel = panel_from_profiles(start(), &profiles);
        let train = DateRange::new(start(), start()).unwrap();
        let fc = climatology_forecast(&panel, "north", day(start(), 1), &train).unwrap();
        assert_eq!(fc, profiles[0]);
    }

    #[test]
    fn climatology_two_matching_days_averages_hourly() {
        let profiles = vec![profile(200.0), profile(300.0), profile(999.0)];
        let panel = panel_from_profiles(start(), &profiles);
        let train = DateRange::new(start(), day(start(), 1)).unwrap();
        let fc = climatology_forecast(&panel, "north", day(start(), 2), &train).unwrap();
        for (h, v) in fc.iter().enumerate() {
            assert!((v - (250.0 + h as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn climatology_matches_brute_force_group_by() {
        use chrono::Datelike;
        // 100 days spanning several months with varying profiles.
        let profiles: Vec<[f64; 24]> = (0..100)
            .map(|d| std::array::from_fn(|h| 100.0 + (d as f64 * 1.7).sin() * 40.0 + h as f64))
            .collect();
        let panel = panel_from_profiles(start(), &profiles);
        let train = DateRange::new(start(), day(start(), 99)).unwrap();
        for target_off in [10u64, 45, 95] {
            let target = day(start(), target_off);
            let fc = climatology_forecast(&panel, "north", target, &train).unwrap();
            for h in 0..24 {
                let matching: Vec<f64> = (0..100)
                    .filter(|&d| day(start(), d).month() == target.month())
                    .map(|d| profiles[d as usize][h])
                    .collect();
                let mean = matching.iter().sum::<f64>() / matching.len() as f64;
                assert!((fc[h] - mean).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn climatology_unvisited_month_borrows_the_nearest_visited_one() {
        // Training data only in the panel's starting month.
        let panel = panel_from_profiles(start(), &[profile(100.0); 10]);
        let train = DateRange::new(start(), day(start(), 9)).unwrap();
        let july = NaiveDate::from_ymd_opt(2021, 7, 4).unwrap();
        let fc = climatology_forecast(&panel, "north", july, &train).unwrap();
        for (h, v) in fc.iter().enumerate() {
            assert!((v - (100.0 + h as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn climatology_without_any_training_days_errors() {
        let panel = panel_from_profiles(start(), &[profile(100.0); 10]);
        // A training range that never intersects the demand history.
        let lo = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        let hi = NaiveDate::from_ymd_opt(2019, 1, 31).unwrap();
        let train = DateRange::new(lo, hi).unwrap();
        let july = NaiveDate::from_ymd_opt(2021, 7, 4).unwrap();
        assert!(matches!(
            climatology_forecast(&panel, "north", july, &train),
            Err(BaselineError::NoHistory { month: 7 })
        ));
    }
}
