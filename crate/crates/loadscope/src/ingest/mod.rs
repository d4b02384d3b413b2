//! Loading, aligning, writing, and synthesizing the input panel.
//!
//! The panel bundles everything one experiment consumes: hourly demand per
//! region, hourly temperature per city, a wide daily textual feature table,
//! three economic indicator series, and a holiday calendar. [`load_panel`]
//! builds it from the five CSV inputs; [`generate_synthetic_panel`] builds
//! one with planted structure for verification; [`write_panel`] serializes a
//! panel back to the same CSV layout (load ∘ write = identity).

mod load;
mod synth;
mod write;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use thiserror::Error;

use crate::data::{DailyFeatureSeries, DataError, HourlyDemandSeries, HourlySeries};

pub use load::{load_panel, PanelPaths};
pub use synth::{generate_synthetic_panel, SynthSpec};
pub use write::write_panel;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}:{line}: {reason}")]
    SchemaError { file: String, line: u64, reason: String },
    #[error("series {series}: {len}-hour gap starting {start} exceeds the interpolation limit")]
    GapTooLarge { series: String, start: chrono::DateTime<chrono::Utc>, len: usize },
    #[error("region {0} has no city mapping")]
    UnmappedRegion(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Longest run of missing hours that linear interpolation may bridge.
/// Beyond this, filled values would distort the daily shape, so loading
/// fails instead.
pub const MAX_GAP_HOURS: usize = 3;

/// All inputs for one experiment, aligned and validated.
#[derive(Debug, Clone)]
pub struct AlignedPanel {
    demand: BTreeMap<String, HourlyDemandSeries>,
    temperature: BTreeMap<String, HourlySeries>,
    textual: Vec<DailyFeatureSeries>,
    economics: Vec<DailyFeatureSeries>,
    holidays: BTreeSet<(String, NaiveDate, String)>,
    region_city: BTreeMap<String, String>,
    interpolated_gaps: usize,
}

impl AlignedPanel {
    /// Assemble and validate a panel.
    ///
    /// Checks that every demand region maps to a city with temperature data
    /// and that all textual series share one date index.
    pub fn new(
        demand: BTreeMap<String, HourlyDemandSeries>,
        temperature: BTreeMap<String, HourlySeries>,
        textual: Vec<DailyFeatureSeries>,
        economics: Vec<DailyFeatureSeries>,
        holidays: BTreeSet<(String, NaiveDate, String)>,
        region_city: BTreeMap<String, String>,
        interpolated_gaps: usize,
    ) -> Result<Self, IngestError> {
        for region in demand.keys() {
            let city = region_city
                .get(region)
                .ok_or_else(|| IngestError::UnmappedRegion(region.clone()))?;
            if !temperature.contains_key(city) {
                return Err(IngestError::UnmappedRegion(format!(
                    "{region}: mapped city {city} has no temperature series"
                )));
            }
        }
        if let Some(first) = textual.first() {
            for s in &textual {
                if s.start() != first.start() || s.len() != first.len() {
                    return Err(IngestError::Data(DataError::InvalidSeries {
                        name: s.name().to_string(),
                        reason: "textual series are not aligned to one date index".into(),
                    }));
                }
            }
        }
        Ok(Self { demand, temperature, textual, economics, holidays, region_city, interpolated_gaps })
    }

    pub fn regions(&self) -> impl Iterator<Item = &str> {
        self.demand.keys().map(String::as_str)
    }

    pub fn demand(&self, region: &str) -> Option<&HourlyDemandSeries> {
        self.demand.get(region)
    }

    pub fn demand_map(&self) -> &BTreeMap<String, HourlyDemandSeries> {
        &self.demand
    }

    pub fn temperature(&self, city: &str) -> Option<&HourlySeries> {
        self.temperature.get(city)
    }

    pub fn temperature_map(&self) -> &BTreeMap<String, HourlySeries> {
        &self.temperature
    }

    /// Temperature series for the city mapped to `region`.
    pub fn temperature_for_region(&self, region: &str) -> Option<&HourlySeries> {
        self.region_city.get(region).and_then(|city| self.temperature.get(city))
    }

    pub fn textual(&self) -> &[DailyFeatureSeries] {
        &self.textual
    }

    pub fn economics(&self) -> &[DailyFeatureSeries] {
        &self.economics
    }

    pub fn holidays(&self) -> &BTreeSet<(String, NaiveDate, String)> {
        &self.holidays
    }

    /// Sorted distinct holiday names across all regions.
    pub fn holiday_names(&self) -> Vec<String> {
        let names: BTreeSet<&String> = self.holidays.iter().map(|(_, _, n)| n).collect();
        names.into_iter().cloned().collect()
    }

    /// First holiday name on `date` in `region`, if any.
    pub fn holiday_on(&self, region: &str, date: NaiveDate) -> Option<&str> {
        self.holidays
            .iter()
            .find(|(r, d, _)| r == region && *d == date)
            .map(|(_, _, n)| n.as_str())
    }

    pub fn region_city(&self) -> &BTreeMap<String, String> {
        &self.region_city
    }

    /// Number of short demand/temperature gaps bridged by interpolation.
    pub fn interpolated_gaps(&self) -> usize {
        self.interpolated_gaps
    }
}

/// Data equality. The interpolated-gap counter is bookkeeping about how the
/// panel was loaded, not part of the data, so write-then-reload round trips
/// compare equal even when the original load repaired gaps.
impl PartialEq for AlignedPanel {
    fn eq(&self, other: &Self) -> bool {
        self.demand == other.demand
            && self.temperature == other.temperature
            && self.textual == other.textual
            && self.economics == other.economics
            && self.holidays == other.holidays
            && self.region_city == other.region_city
    }
}
