use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, Days, NaiveDate, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DailyFeatureSeries, HourlyDemandSeries, HourlySeries};
use crate::stats::task_seed;

use super::{AlignedPanel, IngestError};

/// Planted-structure parameters for [`generate_synthetic_panel`].
///
/// Demand is base level + daily/annual sinusoids + weekend and holiday dips
/// + a linear temperature response + `beta_mw` times the textual driver from
/// `lag_days` back + Gaussian noise. The textual table carries that driver,
/// `driver_copies` noisy copies of it (so clustering has a group to find),
/// and `noise_columns` unrelated columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub regions: Vec<String>,
    pub start: NaiveDate,
    pub base_mw: f64,
    /// Per-region increment on the base level, so regions differ.
    pub region_step_mw: f64,
    pub daily_amp_mw: f64,
    pub weekend_dip_mw: f64,
    pub annual_amp_mw: f64,
    pub temp_coef_mw_per_deg: f64,
    pub temp_ref_c: f64,
    pub holiday_dip_mw: f64,
    pub noise_mw: f64,
    /// MW of demand per unit of the planted textual driver; 0 unplugs it.
    pub beta_mw: f64,
    /// Demand on day d responds to the driver value of day d − lag_days.
    pub lag_days: usize,
    /// AR(1) coefficient of the driver process (|phi| < 1).
    pub driver_phi: f64,
    pub driver_copies: usize,
    pub copy_noise: f64,
    pub noise_columns: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            regions: vec!["east".into(), "west".into()],
            start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            base_mw: 1000.0,
            region_step_mw: 120.0,
            daily_amp_mw: 120.0,
            weekend_dip_mw: 80.0,
            annual_amp_mw: 100.0,
            temp_coef_mw_per_deg: 4.0,
            temp_ref_c: 16.0,
            holiday_dip_mw: 70.0,
            noise_mw: 30.0,
            beta_mw: 50.0,
            lag_days: 1,
            driver_phi: 0.7,
            driver_copies: 3,
            copy_noise: 0.3,
            noise_columns: 5,
        }
    }
}

impl SynthSpec {
    fn validate(&self, days: usize) -> Result<(), IngestError> {
        if days < 120 {
            return Err(IngestError::InvalidSpec(format!(
                "need at least 120 days for a usable panel, got {days}"
            )));
        }
        if self.regions.is_empty() {
            return Err(IngestError::InvalidSpec("no regions".into()));
        }
        let distinct: BTreeSet<&String> = self.regions.iter().collect();
        if distinct.len() != self.regions.len() {
            return Err(IngestError::InvalidSpec("duplicate region names".into()));
        }
        if !self.driver_phi.is_finite() || self.driver_phi.abs() >= 1.0 {
            return Err(IngestError::InvalidSpec(format!(
                "driver_phi {} is not a stationary AR(1) coefficient",
                self.driver_phi
            )));
        }
        if self.noise_mw < 0.0 || self.copy_noise < 0.0 {
            return Err(IngestError::InvalidSpec("noise levels must be >= 0".into()));
        }
        Ok(())
    }

    pub fn city_for(&self, region: &str) -> String {
        format!("{region}_city")
    }
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("sd validated").sample(rng)
}

fn stream(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(task_seed(seed, parts))
}

/// Fixed holiday calendar used by synthetic panels: same four dates each
/// year in every region.
const HOLIDAY_RULES: [(u32, u32, &str); 4] = [
    (1, 1, "new_year"),
    (5, 1, "spring_day"),
    (6, 21, "midsummer"),
    (12, 25, "midwinter"),
];

/// Generate a panel with known planted structure.
///
/// Pure function of `(seed, days, spec)`; the returned spec echoes every
/// coefficient that shaped the data so tests can assert against it.
pub fn generate_synthetic_panel(
    seed: u64,
    days: usize,
    spec: &SynthSpec,
) -> Result<(AlignedPanel, SynthSpec), IngestError> {
    spec.validate(days)?;
    let start_utc: DateTime<Utc> = spec
        .start
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc();
    let end_date = spec.start + Days::new(days as u64 - 1);
    let tau = std::f64::consts::TAU;

    // Driver chain with lag_days of pre-start warm-up so every demand day
    // has a defined driver value lag_days back. Chain index d (0-based from
    // pre-start) feeds demand day d; textual day d stores chain[d + lag].
    let chain_len = days + spec.lag_days;
    let mut rng = stream(seed, &["synth", "driver"]);
    let mut chain = Vec::with_capacity(chain_len);
    let mut x = gauss(&mut rng, 1.0);
    chain.push(x);
    for _ in 1..chain_len {
        x = spec.driver_phi * x + gauss(&mut rng, 1.0);
        chain.push(x);
    }

    // Textual table: driver, noisy copies, pure noise. Names sort into the
    // canonical (alphabetical) column order the loader would produce.
    let mut textual = Vec::new();
    let driver_vals: Vec<f64> = (0..days).map(|d| chain[d + spec.lag_days]).collect();
    textual.push(DailyFeatureSeries::new("driver", spec.start, driver_vals.clone())?);
    for i in 1..=spec.driver_copies {
        let mut rng = stream(seed, &["synth", "copy", &i.to_string()]);
        let vals: Vec<f64> =
            driver_vals.iter().map(|v| v + gauss(&mut rng, spec.copy_noise)).collect();
        textual.push(DailyFeatureSeries::new(format!("driver_copy_{i:02}"), spec.start, vals)?);
    }
    for j in 1..=spec.noise_columns {
        let mut rng = stream(seed, &["synth", "noisecol", &j.to_string()]);
        let vals: Vec<f64> = (0..days).map(|_| gauss(&mut rng, 1.0)).collect();
        textual.push(DailyFeatureSeries::new(format!("noise_{j:02}"), spec.start, vals)?);
    }
    textual.sort_by(|a, b| a.name().cmp(b.name()));

    // Temperature per city: seasonal + diurnal sinusoids + weather noise.
    let mut temperature = BTreeMap::new();
    let mut region_city = BTreeMap::new();
    for region in &spec.regions {
        let city = spec.city_for(region);
        let mut rng = stream(seed, &["synth", "temp", &city]);
        let mut vals = Vec::with_capacity(days * 24);
        for d in 0..days {
            let date = spec.start + Days::new(d as u64);
            let doy = date.ordinal() as f64;
            for h in 0..24 {
                let season = 8.0 * (tau * (doy - 105.0) / 365.0).sin();
                let diurnal = 4.0 * (tau * (h as f64 - 9.0) / 24.0).sin();
                vals.push(12.0 + season + diurnal + gauss(&mut rng, 1.5));
            }
        }
        temperature.insert(city.clone(), HourlySeries::new(city.clone(), start_utc, vals)?);
        region_city.insert(region.clone(), city);
    }

    // Holiday calendar for every covered year.
    let mut holidays = BTreeSet::new();
    for year in spec.start.year()..=end_date.year() {
        for (month, day, name) in HOLIDAY_RULES {
            let date = NaiveDate::from_ymd_opt(year, month, day).expect("rule dates exist");
            if date >= spec.start && date <= end_date {
                for region in &spec.regions {
                    holidays.insert((region.clone(), date, name.to_string()));
                }
            }
        }
    }

    // Demand per region.
    let mut demand = BTreeMap::new();
    for (ri, region) in spec.regions.iter().enumerate() {
        let city = spec.city_for(region);
        let temps = temperature.get(&city).expect("built above").values();
        let mut rng = stream(seed, &["synth", "demand", region]);
        let base = spec.base_mw + spec.region_step_mw * ri as f64;
        let mut vals = Vec::with_capacity(days * 24);
        for d in 0..days {
            let date = spec.start + Days::new(d as u64);
            let dow = date.weekday().num_days_from_monday();
            let doy = date.ordinal() as f64;
            let weekend = if dow >= 5 { -spec.weekend_dip_mw } else { 0.0 };
            let holiday = if holiday_name_on(date).is_some() { -spec.holiday_dip_mw } else { 0.0 };
            let planted = spec.beta_mw * chain[d];
            for h in 0..24 {
                let daily = spec.daily_amp_mw * (tau * (h as f64 - 6.0) / 24.0).sin();
                let annual = spec.annual_amp_mw * (tau * (doy - 15.0) / 365.0).cos();
                let heating = spec.temp_coef_mw_per_deg * (spec.temp_ref_c - temps[d * 24 + h]);
                let noise = gauss(&mut rng, spec.noise_mw);
                let mw = base + daily + weekend + annual + heating + holiday + planted + noise;
                vals.push(mw.max(1.0));
            }
        }
        demand.insert(region.clone(), HourlyDemandSeries::new(region.clone(), start_utc, vals)?);
    }

    // Economics: monthly publication rows; GDP steps quarterly.
    let econ_start = spec.start.with_day(1).expect("first of month");
    let mut rng = stream(seed, &["synth", "econ"]);
    let mut gdp = 100.0;
    let mut inflation = 2.0;
    let mut unemployment = 5.0;
    let mut month_starts = Vec::new();
    let mut m = econ_start;
    while m <= end_date {
        month_starts.push(m);
        m = next_month(m);
    }
    let mut daily = [Vec::new(), Vec::new(), Vec::new()];
    let mut month_idx = 0usize;
    let mut current = (gdp, inflation, unemployment);
    let mut date = econ_start;
    while date <= end_date {
        if month_idx < month_starts.len() && date == month_starts[month_idx] {
            if date.month() % 3 == 1 {
                gdp += 0.5 + gauss(&mut rng, 1.0);
            }
            inflation += gauss(&mut rng, 0.2);
            unemployment += gauss(&mut rng, 0.15);
            current = (gdp, inflation, unemployment);
            month_idx += 1;
        }
        daily[0].push(current.0);
        daily[1].push(current.1);
        daily[2].push(current.2);
        date = date.succ_opt().expect("date range is bounded");
    }
    let economics = vec![
        DailyFeatureSeries::new("gdp", econ_start, daily[0].clone())?,
        DailyFeatureSeries::new("inflation", econ_start, daily[1].clone())?,
        DailyFeatureSeries::new("unemployment", econ_start, daily[2].clone())?,
    ];

    let panel = AlignedPanel::new(
        demand,
        temperature,
        textual,
        economics,
        holidays,
        region_city,
        0,
    )?;
    Ok((panel, spec.clone()))
}

fn holiday_name_on(date: NaiveDate) -> Option<&'static str> {
    HOLIDAY_RULES
        .iter()
        .find(|(m, d, _)| date.month() == *m && date.day() == *d)
        .map(|(_, _, name)| *name)
}

fn next_month(date: NaiveDate) -> NaiveDate {
    let (y, m) = (date.year(), date.month());
    if m == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1).expect("valid date")
    } else {
        NaiveDate::from_ymd_opt(y, m + 1, 1).expect("valid date")
    }
}
