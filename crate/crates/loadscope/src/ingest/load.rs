use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::data::{DailyFeatureSeries, HourlyDemandSeries, HourlySeries};

use super::{AlignedPanel, IngestError, MAX_GAP_HOURS};

/// Locations of the five input CSVs.
#[derive(Debug, Clone)]
pub struct PanelPaths {
    pub demand: PathBuf,
    pub temperature: PathBuf,
    pub text_features: PathBuf,
    pub econ: PathBuf,
    pub holidays: PathBuf,
}

impl PanelPaths {
    /// Conventional file names inside one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            demand: dir.join("demand.csv"),
            temperature: dir.join("temperature.csv"),
            text_features: dir.join("text_features.csv"),
            econ: dir.join("econ.csv"),
            holidays: dir.join("holidays.csv"),
        }
    }
}

#[derive(serde::Serialize, Deserialize)]
pub(super) struct DemandRow {
    pub(super) region: String,
    pub(super) timestamp_utc: DateTime<Utc>,
    pub(super) demand_mw: f64,
}

#[derive(serde::Serialize, Deserialize)]
pub(super) struct TempRow {
    pub(super) city: String,
    pub(super) timestamp_utc: DateTime<Utc>,
    pub(super) temp_c: f64,
}

#[derive(serde::Serialize, Deserialize)]
pub(super) struct TextRow {
    pub(super) date: NaiveDate,
    pub(super) feature: String,
    pub(super) value: f64,
}

#[derive(serde::Serialize, Deserialize)]
pub(super) struct EconRow {
    pub(super) date: NaiveDate,
    pub(super) gdp: f64,
    pub(super) inflation: f64,
    pub(super) unemployment: f64,
}

#[derive(serde::Serialize, Deserialize)]
pub(super) struct HolidayRow {
    pub(super) region: String,
    pub(super) date: NaiveDate,
    pub(super) name: String,
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IngestError> {
    let file_label = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => IngestError::Io {
            path: file_label.clone(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => IngestError::SchemaError { file: file_label.clone(), line: 0, reason: e.to_string() },
    })?;
    let mut rows = Vec::new();
    for result in reader.deserialize() {
        let row: T = result.map_err(|e| IngestError::SchemaError {
            file: file_label.clone(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Sort timestamped values, close gaps of at most [`MAX_GAP_HOURS`] by
/// linear interpolation (each contiguous run counts as one gap), and reject
/// anything worse.
fn assemble_hourly(
    file: &str,
    label: &str,
    mut rows: Vec<(DateTime<Utc>, f64)>,
    gaps: &mut usize,
) -> Result<HourlySeries, IngestError> {
    if rows.is_empty() {
        return Err(IngestError::SchemaError {
            file: file.into(),
            line: 0,
            reason: format!("no rows for series {label}"),
        });
    }
    rows.sort_by_key(|(ts, _)| *ts);
    let mut values = Vec::with_capacity(rows.len());
    let mut prev_ts = rows[0].0;
    let mut prev_val = rows[0].1;
    values.push(prev_val);
    for &(ts, val) in &rows[1..] {
        let diff = ts - prev_ts;
        if diff.num_seconds() <= 0 {
            return Err(IngestError::SchemaError {
                file: file.into(),
                line: 0,
                reason: format!("duplicate timestamp {ts} in series {label}"),
            });
        }
        if diff.num_seconds() % 3600 != 0 {
            return Err(IngestError::SchemaError {
                file: file.into(),
                line: 0,
                reason: format!("timestamp {ts} in series {label} is not on the hour"),
            });
        }
        let missing = (diff.num_hours() - 1) as usize;
        if missing > MAX_GAP_HOURS {
            return Err(IngestError::GapTooLarge {
                series: label.into(),
                start: prev_ts + chrono::Duration::hours(1),
                len: missing,
            });
        }
        if missing > 0 {
            *gaps += 1;
            for i in 1..=missing {
                let w = i as f64 / (missing + 1) as f64;
                values.push(prev_val + (val - prev_val) * w);
            }
        }
        values.push(val);
        prev_ts = ts;
        prev_val = val;
    }
    Ok(HourlySeries::new(label, rows[0].0, values)?)
}

/// Load and align the five CSV inputs.
///
/// Demand and temperature gaps of at most 3 hours are linearly interpolated
/// and counted; economics are forward-filled to daily; textual features are
/// reindexed to the demand date span with absent days set to 0 (a day with
/// no matching news carries no signal).
pub fn load_panel(
    paths: &PanelPaths,
    region_city_map: &BTreeMap<String, String>,
) -> Result<AlignedPanel, IngestError> {
    let mut gaps = 0usize;

    let demand_file = paths.demand.display().to_string();
    let mut by_region: BTreeMap<String, Vec<(DateTime<Utc>, f64)>> = BTreeMap::new();
    for row in read_rows::<DemandRow>(&paths.demand)? {
        by_region.entry(row.region).or_default().push((row.timestamp_utc, row.demand_mw));
    }
    let mut demand = BTreeMap::new();
    for (region, rows) in by_region {
        if !region_city_map.contains_key(&region) {
            return Err(IngestError::UnmappedRegion(region));
        }
        let series = assemble_hourly(&demand_file, &region, rows, &mut gaps)?;
        demand.insert(region, HourlyDemandSeries::from_series(series)?);
    }
    if demand.is_empty() {
        return Err(IngestError::SchemaError {
            file: demand_file,
            line: 0,
            reason: "no demand rows".into(),
        });
    }

    let temp_file = paths.temperature.display().to_string();
    let mut by_city: BTreeMap<String, Vec<(DateTime<Utc>, f64)>> = BTreeMap::new();
    for row in read_rows::<TempRow>(&paths.temperature)? {
        by_city.entry(row.city).or_default().push((row.timestamp_utc, row.temp_c));
    }
    let mut temperature = BTreeMap::new();
    for (city, rows) in by_city {
        temperature.insert(city.clone(), assemble_hourly(&temp_file, &city, rows, &mut gaps)?);
    }

    // Daily reindex range: the union of demand date spans.
    let span_start = demand.values().map(|s| s.start().date_naive()).min().expect("nonempty");
    let span_end = demand
        .values()
        .map(|s| {
            let last = s.series().timestamp(s.series().len() - 1);
            last.date_naive()
        })
        .max()
        .expect("nonempty");

    let text_file = paths.text_features.display().to_string();
    let mut by_feature: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for row in read_rows::<TextRow>(&paths.text_features)? {
        if by_feature.entry(row.feature.clone()).or_default().insert(row.date, row.value).is_some()
        {
            return Err(IngestError::SchemaError {
                file: text_file.clone(),
                line: 0,
                reason: format!("duplicate (date, feature) pair ({}, {})", row.date, row.feature),
            });
        }
    }
    let mut textual = Vec::with_capacity(by_feature.len());
    for (name, by_date) in by_feature {
        let values: Vec<f64> = days_inclusive(span_start, span_end)
            .map(|d| by_date.get(&d).copied().unwrap_or(0.0))
            .collect();
        textual.push(DailyFeatureSeries::new(name, span_start, values)?);
    }

    let econ_file = paths.econ.display().to_string();
    let mut econ_rows = read_rows::<EconRow>(&paths.econ)?;
    econ_rows.sort_by_key(|r| r.date);
    if econ_rows.is_empty() {
        return Err(IngestError::SchemaError {
            file: econ_file,
            line: 0,
            reason: "no economic rows".into(),
        });
    }
    if econ_rows.windows(2).any(|w| w[0].date == w[1].date) {
        return Err(IngestError::SchemaError {
            file: econ_file,
            line: 0,
            reason: "duplicate publication date".into(),
        });
    }
    let econ_start = econ_rows[0].date;
    let mut economics = Vec::with_capacity(3);
    for (name, pick) in [
        ("gdp", (|r: &EconRow| r.gdp) as fn(&EconRow) -> f64),
        ("inflation", |r| r.inflation),
        ("unemployment", |r| r.unemployment),
    ] {
        let mut values = Vec::new();
        let mut idx = 0usize;
        for day in days_inclusive(econ_start, span_end.max(econ_start)) {
            while idx + 1 < econ_rows.len() && econ_rows[idx + 1].date <= day {
                idx += 1;
            }
            values.push(pick(&econ_rows[idx]));
        }
        economics.push(DailyFeatureSeries::new(name, econ_start, values)?);
    }

    // The calendar file is optional: absent means no holidays, not an error.
    let mut holidays = BTreeSet::new();
    if paths.holidays.exists() {
        for row in read_rows::<HolidayRow>(&paths.holidays)? {
            holidays.insert((row.region, row.date, row.name));
        }
    }

    AlignedPanel::new(
        demand,
        temperature,
        textual,
        economics,
        holidays,
        region_city_map.clone(),
        gaps,
    )
}

fn days_inclusive(from: NaiveDate, to: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    std::iter::successors(Some(from), |d| d.succ_opt()).take_while(move |d| *d <= to)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic_panel, write_panel, SynthSpec};

    fn write(dir: &Path, name: &str, content: &str) {
        std::fs::write(dir.join(name), content).unwrap();
    }

    /// Minimal five-file fixture; demand content injectable for gap cases.
    fn fixture(dir: &Path, demand_csv: &str) {
        write(dir, "demand.csv", demand_csv);
        let mut temps = String::from("city,timestamp_utc,temp_c\n");
        for h in 0..48 {
            let day = 1 + h / 24;
            temps.push_str(&format!("metro,2023-01-{day:02}T{:02}:00:00Z,{}\n", h % 24, 5.0));
        }
        write(dir, "temperature.csv", &temps);
        write(dir, "text_features.csv", "date,feature,value\n2023-01-01,topic_a,1.5\n");
        write(
            dir,
            "econ.csv",
            "date,gdp,inflation,unemployment\n2023-01-01,100.0,2.0,5.0\n2023-04-01,101.0,2.1,5.1\n",
        );
        write(dir, "holidays.csv", "region,date,name\neast,2023-01-01,new_year\n");
    }

    fn demand_csv(skip_hours: &[usize]) -> String {
        let mut s = String::from("region,timestamp_utc,demand_mw\n");
        for h in 0..48 {
            if skip_hours.contains(&h) {
                continue;
            }
            let day = 1 + h / 24;
            s.push_str(&format!(
                "east,2023-01-{day:02}T{:02}:00:00Z,{}\n",
                h % 24,
                1000.0 + h as f64
            ));
        }
        s
    }

    fn map() -> BTreeMap<String, String> {
        BTreeMap::from([("east".to_string(), "metro".to_string())])
    }

    #[test]
    fn one_missing_hour_is_interpolated() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), &demand_csv(&[10]));
        let panel = load_panel(&PanelPaths::in_dir(dir.path()), &map()).unwrap();
        let demand = panel.demand("east").unwrap();
        assert_eq!(demand.values().len(), 48);
        // Midpoint of neighbors 1009 and 1011.
        assert_eq!(demand.values()[10], 1010.0);
        assert_eq!(panel.interpolated_gaps(), 1);
    }

    #[test]
    fn four_hour_gap_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), &demand_csv(&[20, 21, 22, 23]));
        let err = load_panel(&PanelPaths::in_dir(dir.path()), &map()).unwrap_err();
        match err {
            IngestError::GapTooLarge { series, len, .. } => {
                assert_eq!(series, "east");
                assert_eq!(len, 4);
            }
            other => panic!("expected GapTooLarge, got {other}"),
        }
    }

    #[test]
    fn quarterly_econ_rows_forward_fill_daily() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), &demand_csv(&[]));
        let panel = load_panel(&PanelPaths::in_dir(dir.path()), &map()).unwrap();
        let gdp = &panel.economics()[0];
        // Demand span is 2 days, so fills stop at 2023-01-02; every day in
        // the first quarter carries the 2023-01-01 publication.
        assert_eq!(gdp.value_on("2023-01-01".parse().unwrap()), Some(100.0));
        assert_eq!(gdp.value_on("2023-01-02".parse().unwrap()), Some(100.0));
    }

    #[test]
    fn missing_text_days_fill_zero() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), &demand_csv(&[]));
        let panel = load_panel(&PanelPaths::in_dir(dir.path()), &map()).unwrap();
        let topic = &panel.textual()[0];
        assert_eq!(topic.value_on("2023-01-01".parse().unwrap()), Some(1.5));
        assert_eq!(topic.value_on("2023-01-02".parse().unwrap()), Some(0.0));
    }

    #[test]
    fn unmapped_region_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), &demand_csv(&[]));
        let err = load_panel(&PanelPaths::in_dir(dir.path()), &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, IngestError::UnmappedRegion(r) if r == "east"));
    }

    #[test]
    fn bad_schema_reports_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), "region,timestamp_utc,demand_mw\neast,not-a-time,1.0\n");
        let err = load_panel(&PanelPaths::in_dir(dir.path()), &map()).unwrap_err();
        match err {
            IngestError::SchemaError { file, line, .. } => {
                assert!(file.ends_with("demand.csv"));
                assert_eq!(line, 2);
            }
            other => panic!("expected SchemaError, got {other}"),
        }
    }

    #[test]
    fn absent_holiday_file_means_empty_calendar() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), &demand_csv(&[]));
        std::fs::remove_file(dir.path().join("holidays.csv")).unwrap();
        let panel = load_panel(&PanelPaths::in_dir(dir.path()), &map()).unwrap();
        assert!(panel.holidays().is_empty());
    }

    #[test]
    fn write_then_load_round_trips() {
        let (panel, _) = generate_synthetic_panel(42, 150, &SynthSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_panel(&panel, dir.path()).unwrap();
        let map: BTreeMap<String, String> = panel.region_city().clone();
        let reloaded = load_panel(&PanelPaths::in_dir(dir.path()), &map).unwrap();
        assert_eq!(panel, reloaded);
    }
}
