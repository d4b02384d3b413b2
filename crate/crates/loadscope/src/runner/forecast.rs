//! Serving forecasts and attributions from a finished run directory.
//!
//! Both commands rebuild the feature row from the run's own config (panel,
//! clustering, design matrix) and then apply the persisted hourly models,
//! so served numbers match what the run would have produced in place.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::attribution::shap_summary;
use crate::data::{split_by_dates, HOURS};
use crate::features::build_design_matrix;
use crate::gbdt::load_model;

use super::pipeline::{
    average_ranked, family_spec, load_or_synthesize, read_manifest, shap_family,
    social_clustering, write_shap_csv,
};
use super::RunnerError;

/// Two-sided 90% normal quantile; the central interval is mu +/- Z_90 * sigma.
pub const Z_90: f64 = 1.6449;

/// One hour of a served forecast, in megawatts.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastRow {
    pub hour: u32,
    pub point_mw: f64,
    pub mu_mw: f64,
    pub sigma_mw: f64,
    pub lo90_mw: f64,
    pub hi90_mw: f64,
}

/// Resolve the requested family against what the run actually trained.
fn resolve_family(
    requested: Option<&str>,
    families: &[String],
) -> Result<String, RunnerError> {
    match requested {
        Some(f) => {
            let f = f.to_ascii_lowercase();
            if families.contains(&f) {
                Ok(f)
            } else {
                Err(RunnerError::ModelNotFound(format!(
                    "family {f:?} was not trained in this run (available: {})",
                    families.join(", ")
                )))
            }
        }
        None => Ok(shap_family(families)),
    }
}

/// Serve the 24 hourly forecasts a run's models make for one target day.
///
/// `issue` is the day the forecast is issued from; the target day is
/// `issue + horizon`. The run must have been executed with model saving
/// enabled.
pub fn cmd_forecast(
    run: &Path,
    region: &str,
    issue: NaiveDate,
    horizon: u32,
    family: Option<&str>,
) -> Result<Vec<ForecastRow>, RunnerError> {
    let manifest = read_manifest(run)?;
    let mut config = manifest.config;
    config.validate()?;
    let family = resolve_family(family, &config.families)?;
    if !config.horizons.contains(&horizon) {
        return Err(RunnerError::ModelNotFound(format!(
            "horizon {horizon} was not trained in this run (available: {:?})",
            config.horizons
        )));
    }
    let train_start = config.split.train().start();
    if issue < train_start {
        return Err(RunnerError::DateOutOfRange(format!(
            "issue date {issue} precedes the training start {train_start}"
        )));
    }

    let mut seeds = BTreeMap::new();
    let panel = load_or_synthesize(&config, &mut seeds)?;
    if !panel.regions().any(|r| r == region) {
        return Err(RunnerError::Data(format!("unknown region {region:?}")));
    }
    let spec = family_spec(&family, &config.features);
    let centroids = if spec.use_social {
        social_clustering(&panel, &config)?.centroids
    } else {
        Vec::new()
    };
    let matrix = build_design_matrix(
        &panel,
        region,
        horizon as usize,
        &spec,
        &centroids,
        config.split.train(),
    )
    .map_err(|e| RunnerError::Data(e.to_string()))?;
    let row = matrix.issue_dates().iter().position(|&d| d == issue).ok_or_else(|| {
        let span = match (matrix.issue_dates().first(), matrix.issue_dates().last()) {
            (Some(lo), Some(hi)) => format!(" (usable issue dates: {lo}..{hi})"),
            _ => String::new(),
        };
        RunnerError::DateOutOfRange(format!(
            "issue date {issue} has no usable row at horizon {horizon}{span}"
        ))
    })?;
    let x = matrix.features().select_rows(&[row]);

    let mut rows = Vec::with_capacity(HOURS);
    for hour in 0..HOURS {
        let rel = format!("models/{region}/h{horizon:02}/{family}/hour{hour:02}.json");
        let path = run.join(&rel);
        if !path.exists() {
            return Err(RunnerError::ModelNotFound(format!(
                "{} (was the run executed with save_models = true?)",
                path.display()
            )));
        }
        let payload =
            load_model(&path).map_err(|e| RunnerError::Data(format!("{rel}: {e}")))?;
        let g = payload
            .as_gaussian()
            .ok_or_else(|| RunnerError::Data(format!("{rel}: expected a probabilistic model")))?;
        let (mu, sigma) = g
            .predict(&x)
            .map_err(|e| RunnerError::Internal { task: rel.clone(), msg: e.to_string() })?;
        let (mu, sigma) = (mu[0], sigma[0]);
        rows.push(ForecastRow {
            hour: hour as u32,
            point_mw: mu,
            mu_mw: mu,
            sigma_mw: sigma,
            lo90_mw: mu - Z_90 * sigma,
            hi90_mw: mu + Z_90 * sigma,
        });
    }
    Ok(rows)
}

/// Render forecast rows as the CSV table the CLI prints and saves.
pub(crate) fn forecast_csv(rows: &[ForecastRow]) -> String {
    let mut s = String::from("hour,point_mw,mu_mw,sigma_mw,lo90_mw,hi90_mw\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
            r.hour, r.point_mw, r.mu_mw, r.sigma_mw, r.lo90_mw, r.hi90_mw
        ));
    }
    s
}

/// Recompute the run's feature attribution summary from its saved noon
/// models, writing `shap_summary.csv` into `out` (default: the run dir).
pub fn cmd_attribute(
    run: &Path,
    family: Option<&str>,
    out: Option<&Path>,
) -> Result<Vec<(String, f64)>, RunnerError> {
    let manifest = read_manifest(run)?;
    let mut config = manifest.config;
    config.validate()?;
    let family = resolve_family(family, &config.families)?;

    let mut seeds = BTreeMap::new();
    let panel = load_or_synthesize(&config, &mut seeds)?;
    let spec = family_spec(&family, &config.features);
    let centroids = if spec.use_social {
        social_clustering(&panel, &config)?.centroids
    } else {
        Vec::new()
    };

    let regions: Vec<String> = panel.regions().map(str::to_string).collect();
    let mut lists = Vec::new();
    for region in &regions {
        for &h in &config.horizons {
            let matrix = build_design_matrix(
                &panel,
                region,
                h as usize,
                &spec,
                &centroids,
                config.split.train(),
            )
            .map_err(|e| RunnerError::Data(e.to_string()))?;
            let parts = split_by_dates(&matrix, &config.split)
                .map_err(|e| RunnerError::Data(e.to_string()))?;
            let rel = format!("models/{region}/h{h:02}/{family}/hour12.json");
            let path = run.join(&rel);
            if !path.exists() {
                return Err(RunnerError::ModelNotFound(path.display().to_string()));
            }
            let payload =
                load_model(&path).map_err(|e| RunnerError::Data(format!("{rel}: {e}")))?;
            let g = payload.as_gaussian().ok_or_else(|| {
                RunnerError::Data(format!("{rel}: expected a probabilistic model"))
            })?;
            let mut m = g.mu().clone();
            if let Some(scale) = g.target_scale() {
                m.set_target_scale(scale);
            }
            let ranked = shap_summary(&m, parts.test.features())
                .map_err(|e| RunnerError::Internal { task: rel, msg: e.to_string() })?;
            lists.push(ranked);
        }
    }
    let ranked = average_ranked(lists.iter().map(|l| l.as_slice()));
    let dir = out.unwrap_or(run);
    fs::create_dir_all(dir).map_err(|e| RunnerError::Internal {
        task: format!("create {}", dir.display()),
        msg: e.to_string(),
    })?;
    write_shap_csv(&dir.join("shap_summary.csv"), &ranked)?;
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;

    use crate::data::{DateRange, SplitSpec};
    use crate::gbdt::{HyperParams, SearchSpace};
    use crate::ingest::{generate_synthetic_panel, write_panel, SynthSpec};
    use crate::runner::config::{
        CausalitySection, DataSection, RunConfig, TuningSection,
    };
    use crate::runner::pipeline::cmd_run;
    use crate::runner::pipeline::fixtures::tiny_run;

    use super::*;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
    }

    #[test]
    fn served_rows_cover_all_hours_with_symmetric_bounds() {
        let run = tiny_run();
        let rows = cmd_forecast(&run.out, "east", day(2021, 5, 20), 1, None).unwrap();
        assert_eq!(rows.len(), 24);
        for (h, row) in rows.iter().enumerate() {
            assert_eq!(row.hour, h as u32);
            assert_eq!(row.point_mw, row.mu_mw);
            assert!(row.sigma_mw > 0.0, "hour {h}: sigma {}", row.sigma_mw);
            assert!(row.mu_mw > 100.0, "hour {h}: implausible level {}", row.mu_mw);
            let width = row.hi90_mw - row.lo90_mw;
            assert!(
                (width - 2.0 * Z_90 * row.sigma_mw).abs() < 1e-9,
                "hour {h}: width {width} vs sigma {}",
                row.sigma_mw
            );
        }
    }

    #[test]
    fn issue_before_training_start_is_out_of_range() {
        let run = tiny_run();
        let err = cmd_forecast(&run.out, "east", day(2020, 12, 1), 1, None).unwrap_err();
        assert!(matches!(err, RunnerError::DateOutOfRange(_)), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn issue_past_the_panel_is_out_of_range() {
        let run = tiny_run();
        // 160-day panel from 2021-01-01 ends 2021-06-09.
        let err = cmd_forecast(&run.out, "east", day(2021, 6, 30), 1, None).unwrap_err();
        assert!(matches!(err, RunnerError::DateOutOfRange(_)), "{err}");
    }

    #[test]
    fn untrained_family_and_horizon_are_model_not_found() {
        let run = tiny_run();
        let err =
            cmd_forecast(&run.out, "east", day(2021, 5, 20), 1, Some("gbm-es")).unwrap_err();
        assert!(matches!(err, RunnerError::ModelNotFound(_)), "{err}");
        let err = cmd_forecast(&run.out, "east", day(2021, 5, 20), 25, None).unwrap_err();
        assert!(matches!(err, RunnerError::ModelNotFound(_)), "{err}");
    }

    #[test]
    fn attribute_reproduces_the_run_summary_from_saved_models() {
        let run = tiny_run();
        let dir = tempfile::tempdir().unwrap();
        let ranked = cmd_attribute(&run.out, None, Some(dir.path())).unwrap();
        assert!(!ranked.is_empty());
        assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1), "not sorted");
        // Same models, same test rows: byte-identical summary.
        let recomputed = std::fs::read(dir.path().join("shap_summary.csv")).unwrap();
        let original = std::fs::read(run.out.join("shap_summary.csv")).unwrap();
        assert_eq!(recomputed, original);
    }

    /// Build, run, and serve a small CSV-backed pipeline whose holiday
    /// calendar can be kept or dropped.
    fn dip_run(base: &Path, panel_src: &crate::ingest::AlignedPanel, keep_calendar: bool) -> PathBuf {
        let label = if keep_calendar { "aware" } else { "blind" };
        let data_dir = base.join(label).join("panel");
        fs::create_dir_all(&data_dir).unwrap();
        write_panel(panel_src, &data_dir).unwrap();
        if keep_calendar {
            // Collapse the calendar to one shared class so the dummy
            // generalizes from the training holidays to the held-out one.
            let mut csv = String::from("region,date,name\n");
            for (region, date, _) in panel_src.holidays() {
                csv.push_str(&format!("{region},{date},public_holiday\n"));
            }
            fs::write(data_dir.join("holidays.csv"), csv).unwrap();
        } else {
            fs::remove_file(data_dir.join("holidays.csv")).unwrap();
        }

        let out = base.join(label).join("out");
        let params = HyperParams {
            n_trees: 80,
            learning_rate: 0.25,
            max_depth: 5,
            min_samples_leaf: 2,
            l2_leaf_reg: 0.1,
            early_stopping_rounds: 80,
            ..HyperParams::default()
        };
        // The validation targets must contain a holiday (2022-01-01):
        // early stopping keeps only trees that improve validation error,
        // and without a dipped validation day it would truncate away the
        // very trees that learn the calendar effect.
        let config = RunConfig {
            seed: 3,
            out: out.clone(),
            jobs: 1,
            horizons: vec![1],
            families: vec!["gbm".into()],
            save_models: true,
            data: DataSection {
                dir: Some(data_dir),
                regions: Some([("east".to_string(), "east_city".to_string())].into()),
                synth: None,
            },
            split: SplitSpec::new(
                DateRange::new(day(2021, 5, 3), day(2021, 12, 25)).unwrap(),
                DateRange::new(day(2021, 12, 26), day(2022, 1, 20)).unwrap(),
                DateRange::new(day(2022, 4, 25), day(2022, 5, 5)).unwrap(),
            )
            .unwrap(),
            features: Default::default(),
            tuning: TuningSection {
                budget: 1,
                space: Some(SearchSpace::Grid(vec![params])),
            },
            causality: CausalitySection { enabled: false, ..Default::default() },
        };
        cmd_run(&config).unwrap();
        out
    }

    #[test]
    fn holiday_calendar_lowers_daytime_forecasts_on_planted_dip_days() {
        // Panel spans 2021-05-02..2022-05-06: the training targets contain
        // two dipped holidays and validation one more, while the test span
        // holds a fourth (2022-05-01) whose calendar date never occurs in
        // training. Only a model that saw the calendar can anticipate it.
        let spec = SynthSpec {
            regions: vec!["east".into()],
            start: day(2021, 5, 2),
            holiday_dip_mw: 200.0,
            noise_mw: 10.0,
            beta_mw: 0.0,
            driver_copies: 0,
            noise_columns: 1,
            ..SynthSpec::default()
        };
        let (panel, _) = generate_synthetic_panel(21, 370, &spec).unwrap();
        let base = tempfile::tempdir().unwrap();
        let aware = dip_run(base.path(), &panel, true);
        let blind = dip_run(base.path(), &panel, false);

        let issue = day(2022, 4, 30);
        let aware_rows = cmd_forecast(&aware, "east", issue, 1, None).unwrap();
        let blind_rows = cmd_forecast(&blind, "east", issue, 1, None).unwrap();
        let mut gaps = Vec::new();
        for h in 8..20 {
            let gap = blind_rows[h].point_mw - aware_rows[h].point_mw;
            assert!(
                gap > 0.0,
                "hour {h}: calendar-aware {} not below calendar-blind {}",
                aware_rows[h].point_mw,
                blind_rows[h].point_mw
            );
            gaps.push(gap);
        }
        let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!(mean_gap > 50.0, "mean daytime gap only {mean_gap:.1} MW");
    }
}
