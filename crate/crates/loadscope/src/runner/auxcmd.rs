//! Standalone subcommands that run one pipeline stage in isolation:
//! panel synthesis, textual-feature clustering, and the causal analyses.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::ingest::{write_panel, AlignedPanel};

use super::config::RunConfig;
use super::pipeline::{
    causality_dml, causality_granger, load_or_synthesize, resolve_causal_features,
    social_clustering, write_dml_csv, write_granger_csv, ClusterSummary,
};
use super::RunnerError;

fn ensure_dir(out: &Path) -> Result<(), RunnerError> {
    fs::create_dir_all(out).map_err(|e| RunnerError::Internal {
        task: format!("create {}", out.display()),
        msg: e.to_string(),
    })
}

/// Generate the synthetic panel described by `[data.synth]` and write it
/// as the five-file CSV layout under `out`.
pub fn cmd_synth(config: &RunConfig, out: &Path) -> Result<AlignedPanel, RunnerError> {
    let mut config = config.clone();
    config.validate()?;
    if config.data.synth.is_none() {
        return Err(RunnerError::Config("synth requires a [data.synth] section".into()));
    }
    let mut seeds = BTreeMap::new();
    let panel = load_or_synthesize(&config, &mut seeds)?;
    ensure_dir(out)?;
    write_panel(&panel, out).map_err(|e| RunnerError::Internal {
        task: format!("write panel to {}", out.display()),
        msg: e.to_string(),
    })?;
    Ok(panel)
}

#[derive(Serialize)]
struct ClusterCsvRow<'a> {
    feature: &'a str,
    centroid: &'a str,
}

#[derive(Serialize)]
struct MergeCsvRow {
    step: usize,
    a: usize,
    b: usize,
    height: f64,
}

/// Cluster the panel's textual features over the training span, writing
/// `clusters.csv` (feature -> centroid) and `cluster_merges.csv` (the
/// full merge sequence) under `out`.
pub fn cmd_cluster(config: &RunConfig, out: &Path) -> Result<ClusterSummary, RunnerError> {
    let mut config = config.clone();
    config.validate()?;
    let mut seeds = BTreeMap::new();
    let panel = load_or_synthesize(&config, &mut seeds)?;
    let clustering = social_clustering(&panel, &config)?;
    ensure_dir(out)?;

    let mut pairs: Vec<(&str, &str)> = Vec::new();
    for (centroid, members) in &clustering.summary.members {
        for feature in members {
            pairs.push((feature.as_str(), centroid.as_str()));
        }
    }
    pairs.sort();
    let rows: Vec<ClusterCsvRow> =
        pairs.iter().map(|(f, c)| ClusterCsvRow { feature: f, centroid: c }).collect();
    super::pipeline::write_csv_records(&out.join("clusters.csv"), &["feature", "centroid"], &rows)?;

    let merges: Vec<MergeCsvRow> = clustering
        .result
        .merges()
        .iter()
        .enumerate()
        .map(|(step, m)| MergeCsvRow { step, a: m.a, b: m.b, height: m.height })
        .collect();
    super::pipeline::write_csv_records(
        &out.join("cluster_merges.csv"),
        &["step", "a", "b", "height"],
        &merges,
    )?;
    Ok(clustering.summary)
}

/// Run both causal analyses for the configured features and write their
/// tables under `out`. Runs even when `causality.enabled` is false: an
/// explicit invocation overrides the run-level switch. Returns the row
/// counts of the two tables.
pub fn cmd_causality(config: &RunConfig, out: &Path) -> Result<(usize, usize), RunnerError> {
    let mut config = config.clone();
    config.validate()?;
    let mut seeds = BTreeMap::new();
    let panel = load_or_synthesize(&config, &mut seeds)?;
    let features = resolve_causal_features(&panel, &config)?;
    let regions: Vec<String> = panel.regions().map(str::to_string).collect();
    let horizons: Vec<u32> =
        config.causality.horizons.clone().unwrap_or_else(|| config.horizons.clone());

    let granger = causality_granger(&panel, &config, &features, &regions)?;
    let dml = causality_dml(&panel, &config, &features, &regions, &horizons)?;
    ensure_dir(out)?;
    write_granger_csv(&out.join("causality_granger.csv"), &granger)?;
    write_dml_csv(&out.join("causality_dml.csv"), &dml)?;
    Ok((granger.len(), dml.len()))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use crate::ingest::{load_panel, PanelPaths, SynthSpec};
    use crate::runner::config::SynthSection;
    use crate::runner::pipeline::fixtures::tiny_config;

    use super::*;

    #[test]
    fn synth_writes_a_reloadable_panel() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path().join("unused_out"));
        let panel = cmd_synth(&config, &dir.path().join("panel")).unwrap();
        let reloaded = load_panel(
            &PanelPaths::in_dir(&dir.path().join("panel")),
            panel.region_city(),
        )
        .unwrap();
        assert_eq!(panel, reloaded);
    }

    #[test]
    fn synth_without_a_generator_section_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(dir.path().join("out"));
        config.data.synth = None;
        config.data.dir = Some(dir.path().to_path_buf());
        config.data.regions = Some([("east".into(), "east_city".into())].into());
        let err = cmd_synth(&config, &dir.path().join("panel")).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn cluster_groups_the_planted_driver_copies() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(dir.path().join("out"));
        config.data.synth = Some(SynthSection {
            days: 150,
            spec: SynthSpec { driver_copies: 3, noise_columns: 4, ..SynthSpec::default() },
        });
        let out = dir.path().join("clusters");
        let summary = cmd_cluster(&config, &out).unwrap();

        let driver_members = summary
            .members
            .values()
            .find(|m| m.iter().any(|f| f == "driver"))
            .expect("driver belongs to some cluster");
        for copy in ["driver_copy_01", "driver_copy_02", "driver_copy_03"] {
            assert!(
                driver_members.iter().any(|f| f == copy),
                "{copy} separated from driver: {driver_members:?}"
            );
        }

        let clusters = std::fs::read_to_string(out.join("clusters.csv")).unwrap();
        assert!(clusters.starts_with("feature,centroid\n"));
        assert_eq!(clusters.lines().count(), 1 + 8, "one row per textual feature");
        let merges = std::fs::read_to_string(out.join("cluster_merges.csv")).unwrap();
        assert_eq!(merges.lines().count(), 1 + 7, "n - 1 merges for 8 features");
    }

    #[test]
    fn causality_recovers_the_planted_direction_and_effect() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(dir.path().join("out"));
        config.data.synth = Some(SynthSection {
            days: 150,
            spec: SynthSpec {
                regions: vec!["east".into()],
                beta_mw: 80.0,
                driver_copies: 0,
                noise_columns: 3,
                ..SynthSpec::default()
            },
        });
        config.causality.features = Some(vec!["driver".into()]);
        config.causality.horizons = Some(vec![1]);
        let out = dir.path().join("causality");
        let (g, d) = cmd_causality(&config, &out).unwrap();
        assert_eq!(g, 2, "two direction rows for one feature x one region");
        assert_eq!(d, 1, "one effect row for one horizon");

        let granger = std::fs::read_to_string(out.join("causality_granger.csv")).unwrap();
        let forward: BTreeMap<&str, &str> = {
            let header: Vec<&str> = granger.lines().next().unwrap().split(',').collect();
            let row: Vec<&str> = granger
                .lines()
                .find(|l| l.starts_with("driver,east,x_to_y,"))
                .expect("forward direction row")
                .split(',')
                .collect();
            header.into_iter().zip(row).collect()
        };
        let p: f64 = forward["p_value"].parse().unwrap();
        assert!(p < 0.05, "planted driver not significant: p = {p}");
        assert!(
            forward["relation"] == "x_to_y" || forward["relation"] == "both",
            "relation = {}",
            forward["relation"]
        );

        let dml = std::fs::read_to_string(out.join("causality_dml.csv")).unwrap();
        let effect: Vec<&str> = dml.lines().nth(1).unwrap().split(',').collect();
        let delta: f64 = effect[3].parse().unwrap();
        let ci_hi: f64 = effect[6].parse().unwrap();
        assert!(delta > 10.0, "planted effect too small: delta = {delta}");
        assert!(ci_hi > 0.0);
    }
}
