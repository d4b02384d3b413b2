use std::path::Path;

use super::load::{DemandRow, EconRow, HolidayRow, TempRow, TextRow};
use super::{AlignedPanel, IngestError};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, IngestError> {
    csv::Writer::from_path(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })
}

fn write_row<W: std::io::Write, R: serde::Serialize>(
    w: &mut csv::Writer<W>,
    path: &Path,
    row: &R,
) -> Result<(), IngestError> {
    w.serialize(row).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })
}

/// Serialize a panel to the five-CSV input layout inside `dir`.
///
/// Output is canonical (rows sorted, every aligned day written), so loading
/// the written files reproduces the panel exactly.
pub fn write_panel(panel: &AlignedPanel, dir: impl AsRef<Path>) -> Result<(), IngestError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)
        .map_err(|e| IngestError::Io { path: dir.display().to_string(), source: e })?;

    let path = dir.join("demand.csv");
    let mut w = writer(&path)?;
    for (region, series) in panel.demand_map() {
        for (i, &v) in series.values().iter().enumerate() {
            let row = DemandRow {
                region: region.clone(),
                timestamp_utc: series.series().timestamp(i),
                demand_mw: v,
            };
            write_row(&mut w, &path, &row)?;
        }
    }

    let path = dir.join("temperature.csv");
    let mut w = writer(&path)?;
    for (city, series) in panel.temperature_map() {
        for (i, &v) in series.values().iter().enumerate() {
            let row =
                TempRow { city: city.clone(), timestamp_utc: series.timestamp(i), temp_c: v };
            write_row(&mut w, &path, &row)?;
        }
    }

    let path = dir.join("text_features.csv");
    let mut w = writer(&path)?;
    for series in panel.textual() {
        for (i, &v) in series.values().iter().enumerate() {
            let row =
                TextRow { date: series.date(i), feature: series.name().to_string(), value: v };
            write_row(&mut w, &path, &row)?;
        }
    }

    let path = dir.join("econ.csv");
    let mut w = writer(&path)?;
    let econ = panel.economics();
    if econ.len() == 3 {
        let (gdp, infl, unemp) = (&econ[0], &econ[1], &econ[2]);
        for i in 0..gdp.len() {
            let row = EconRow {
                date: gdp.date(i),
                gdp: gdp.values()[i],
                inflation: infl.values()[i],
                unemployment: unemp.values()[i],
            };
            write_row(&mut w, &path, &row)?;
        }
    }

    let path = dir.join("holidays.csv");
    let mut w = writer(&path)?;
    for (region, date, name) in panel.holidays() {
        let row = HolidayRow { region: region.clone(), date: *date, name: name.clone() };
        write_row(&mut w, &path, &row)?;
    }
    Ok(())
}
