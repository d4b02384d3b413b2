//! The end-to-end experiment pipeline behind `loadscope run`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attribution::shap_summary;
use crate::baselines::{climatology_forecast, combine_pf_scf, persistence_forecast};
use crate::causality::{causal_profile, granger_test, CausalityError};
use crate::data::{split_by_dates, DailyFeatureSeries, DesignMatrix, Table, HOURS};
use crate::diagnostics::{pit_and_reliability, CalibrationReport};
use crate::evaluation::{
    crps_batch, evaluate_point, improvement_table, EvalError, ImprovementRow, ScoreRow,
    ScoreTable, write_improvements,
};
use crate::features::{
    build_design_matrix, cluster_textual_features, extract_centroids, select_k_elbow,
    ClusterResult, FeatureSpec, SocialK,
};
use crate::gbdt::{
    fit_gaussian, save_model, tune, GaussianEnsemble, GbdtError, HyperParams, ModelPayload,
    PresortedMatrix, RandomSpace, SearchSpace, TargetScale,
};
use crate::ingest::{
    generate_synthetic_panel, load_panel, AlignedPanel, IngestError, PanelPaths,
};
use crate::stats::task_seed;

use super::config::{FeatureSection, RunConfig, TuningSection, FAMILIES};
use super::plots::{write_heatmap, write_line_chart, Series};
use super::RunnerError;

/// Target hours whose columns drive the shared hyperparameter search; one
/// night, two shoulder, and one peak column stand in for all 24.
const TUNE_HOURS: [usize; 4] = [0, 6, 12, 18];

/// Horizon buckets used by plot columns, matching the improvement table.
const WEEK_GROUP_ORDER: [&str; 4] = ["1-7", "8-14", "15-21", "22-30"];

/// Nuisance learner for treatment-effect profiles: shallow and strongly
/// regularized, since only residuals feed the final regression.
pub(crate) fn nuisance_params() -> HyperParams {
    HyperParams {
        n_trees: 60,
        learning_rate: 0.1,
        max_depth: 3,
        min_samples_leaf: 15,
        ..HyperParams::default()
    }
}

/// Record of one finished run: enough to audit it or re-run bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    /// The exact (normalized) config the run executed.
    pub config: RunConfig,
    /// Derived seed of every stochastic task.
    pub task_seeds: BTreeMap<String, u64>,
    /// Hyperparameters chosen per (region, horizon, family) task.
    pub chosen_params: BTreeMap<String, HyperParams>,
    /// Social-factor clustering outcome, when any family used it.
    pub clusters: Option<ClusterSummary>,
    /// Wall-clock phase durations live in this sibling file, outside the
    /// deterministic artifact set.
    pub timings_file: String,
    /// Relative artifact path -> SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

/// Chosen cluster count and the keyword membership of each centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub k: usize,
    /// Centroid column name -> member feature names.
    pub members: BTreeMap<String, Vec<String>>,
}

/// Run the whole experiment described by `config`, returning the manifest
/// that was also written to `<out>/manifest.json`.
pub fn cmd_run(config: &RunConfig) -> Result<RunManifest, RunnerError> {
    let t_total = Instant::now();
    let mut config = config.clone();
    config.validate()?;
    let out = config.out.clone();
    fs::create_dir_all(&out).map_err(|e| write_err(&out, e))?;

    let mut task_seeds: BTreeMap<String, u64> = BTreeMap::new();
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();

    let t0 = Instant::now();
    let panel = load_or_synthesize(&config, &mut task_seeds)?;
    timings.insert("ingest_s".into(), t0.elapsed().as_secs_f64());

    let regions: Vec<String> = panel.regions().map(str::to_string).collect();

    let t0 = Instant::now();
    let needs_social = config.families.iter().any(|f| f == "gbm-s" || f == "gbm-es");
    let (centroids, clusters) = if needs_social {
        let c = social_clustering(&panel, &config)?;
        (c.centroids, Some(c.summary))
    } else {
        (Vec::new(), None)
    };
    timings.insert("clustering_s".into(), t0.elapsed().as_secs_f64());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| RunnerError::Internal { task: "scheduler".into(), msg: e.to_string() })?;

    // Model tasks: one per (region, horizon, family), each fitting 24
    // hourly models. Results collect in task order, so schedules never
    // change outputs.
    let t0 = Instant::now();
    let shap_target = shap_family(&config.families);
    let mut keys: Vec<(String, u32, String)> = Vec::new();
    for region in &regions {
        for &h in &config.horizons {
            for family in &config.families {
                keys.push((region.clone(), h, family.clone()));
            }
        }
    }
    let outputs: Vec<TaskOutput> = pool.install(|| {
        keys.par_iter()
            .map(|(region, h, family)| {
                run_task(&panel, &config, &centroids, &out, &shap_target, region, *h, family)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    timings.insert("training_s".into(), t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let mut pairs: Vec<(String, u32)> = Vec::new();
    for region in &regions {
        for &h in &config.horizons {
            pairs.push((region.clone(), h));
        }
    }
    let baseline_rows: Vec<Vec<ScoreRow>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(region, h)| run_baselines(&panel, &config, region, *h))
            .collect::<Result<Vec<_>, _>>()
    })?;
    timings.insert("baselines_s".into(), t0.elapsed().as_secs_f64());

    let mut chosen_params: BTreeMap<String, HyperParams> = BTreeMap::new();
    for o in &outputs {
        let key = format!("{}/h{:02}/{}", o.region, o.horizon, o.family);
        task_seeds.insert(format!("tune/{key}"), o.tune_seed);
        for (hour, s) in o.fit_seeds.iter().enumerate() {
            task_seeds.insert(format!("fit/{key}/hour{hour:02}"), *s);
        }
        chosen_params.insert(key, o.params.clone());
    }

    let mut files: Vec<String> = outputs.iter().flat_map(|o| o.model_files.clone()).collect();

    // scores.csv: per (region, horizon) the family rows then the baselines.
    let mut table = ScoreTable::new();
    for region in &regions {
        for &h in &config.horizons {
            for o in outputs.iter().filter(|o| &o.region == region && o.horizon == h) {
                table.push(o.score.clone());
            }
            let idx = pairs.iter().position(|(r, hh)| r == region && *hh == h).expect("pair");
            for row in &baseline_rows[idx] {
                table.push(row.clone());
            }
        }
    }
    table
        .write_csv(&out.join("scores.csv"))
        .map_err(|e| write_err(&out.join("scores.csv"), e))?;
    files.push("scores.csv".into());

    // improvements.csv: every variant against the base family, and the
    // base family against the strongest naive baseline.
    let single = |model: &str| -> ScoreTable {
        let mut t = ScoreTable::new();
        for row in table.for_model(model) {
            t.push(row.clone());
        }
        t
    };
    let base_family = if config.families.iter().any(|f| f == "gbm") {
        "gbm".to_string()
    } else {
        config.families[0].clone()
    };
    let base_name = model_name(&base_family);
    let mut improvements: Vec<ImprovementRow> = Vec::new();
    for family in &config.families {
        if family != &base_family {
            let rows = improvement_table(&single(&base_name), &single(&model_name(family)))
                .map_err(|e| internal_err("improvements", e))?;
            improvements.extend(rows);
        }
    }
    improvements.extend(
        improvement_table(&single("PF-SCF"), &single(&base_name))
            .map_err(|e| internal_err("improvements", e))?,
    );
    write_improvements(&improvements, &out.join("improvements.csv"))
        .map_err(|e| write_err(&out.join("improvements.csv"), e))?;
    files.push("improvements.csv".into());

    // Causal analyses over the textual features.
    let t0 = Instant::now();
    let (granger_rows, dml_rows) = if config.causality.enabled {
        let features = resolve_causal_features(&panel, &config)?;
        let dml_horizons: Vec<u32> =
            config.causality.horizons.clone().unwrap_or_else(|| config.horizons.clone());
        let granger = causality_granger(&panel, &config, &features, &regions)?;
        let dml =
            pool.install(|| causality_dml(&panel, &config, &features, &regions, &dml_horizons))?;
        for f in &features {
            for r in &regions {
                for &h in &dml_horizons {
                    task_seeds.insert(
                        format!("causal-profile/{r}/{f}/h{h:02}"),
                        task_seed(config.seed, &["causal-profile", r, f, &h.to_string()]),
                    );
                }
            }
        }
        (granger, dml)
    } else {
        (Vec::new(), Vec::new())
    };
    write_granger_csv(&out.join("causality_granger.csv"), &granger_rows)?;
    files.push("causality_granger.csv".into());
    write_dml_csv(&out.join("causality_dml.csv"), &dml_rows)?;
    files.push("causality_dml.csv".into());
    timings.insert("causality_s".into(), t0.elapsed().as_secs_f64());

    // Attribution summary from the richest family's noon models.
    let shap_rows =
        average_ranked(outputs.iter().filter_map(|o| o.shap.as_deref()));
    write_shap_csv(&out.join("shap_summary.csv"), &shap_rows)?;
    files.push("shap_summary.csv".into());

    // Calibration diagnostics pooled per (region, family) over horizons.
    let t0 = Instant::now();
    fs::create_dir_all(out.join("calibration"))
        .map_err(|e| write_err(&out.join("calibration"), e))?;
    let mut calibration_summary: Vec<CalibrationSummaryRow> = Vec::new();
    let mut reports: Vec<(String, String, CalibrationReport)> = Vec::new();
    for region in &regions {
        for family in &config.families {
            let mut mu = Vec::new();
            let mut sigma = Vec::new();
            let mut truth = Vec::new();
            for o in outputs.iter().filter(|o| &o.region == region && &o.family == family) {
                mu.extend_from_slice(&o.mu_flat);
                sigma.extend_from_slice(&o.sigma_flat);
                truth.extend_from_slice(&o.truth_flat);
            }
            let report = pit_and_reliability(&mu, &sigma, &truth)
                .map_err(|e| internal_err(&format!("calibration {region}/{family}"), e))?;
            let rel = format!("calibration/{region}_{family}.csv");
            write_calibration_detail(&out.join(&rel), &report)?;
            files.push(rel);
            calibration_summary.push(CalibrationSummaryRow {
                region: region.clone(),
                model: model_name(family),
                n: mu.len(),
                max_reliability_deviation: report.max_reliability_deviation,
                ks_stat: report.ks_stat,
            });
            reports.push((region.clone(), family.clone(), report));
        }
    }
    write_calibration_summary(&out.join("calibration/summary.csv"), &calibration_summary)?;
    files.push("calibration/summary.csv".into());
    timings.insert("diagnostics_s".into(), t0.elapsed().as_secs_f64());

    // Plots.
    fs::create_dir_all(out.join("plots")).map_err(|e| write_err(&out.join("plots"), e))?;
    write_run_plots(&out, &config, &regions, &table, &improvements, &base_name, &reports)?;
    for name in ["improvement_heatmap", "mape_by_horizon", "reliability", "qq"] {
        files.push(format!("plots/{name}.svg"));
    }

    // Inventory, manifest, and (last, unhashed) timings.
    files.sort();
    files.dedup();
    let mut inventory = BTreeMap::new();
    for rel in &files {
        inventory.insert(rel.clone(), sha256_file(&out.join(rel))?);
    }
    timings.insert("total_s".into(), t_total.elapsed().as_secs_f64());
    let manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        task_seeds,
        chosen_params,
        clusters,
        timings_file: "timings.json".into(),
        files: inventory,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| internal_err("manifest", e))?;
    fs::write(out.join("manifest.json"), manifest_json + "\n")
        .map_err(|e| write_err(&out.join("manifest.json"), e))?;
    let timings_json =
        serde_json::to_string_pretty(&timings).map_err(|e| internal_err("timings", e))?;
    fs::write(out.join("timings.json"), timings_json + "\n")
        .map_err(|e| write_err(&out.join("timings.json"), e))?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Panel and clustering

/// Build the panel from CSVs or the synthetic generator, per the config.
pub(crate) fn load_or_synthesize(
    config: &RunConfig,
    task_seeds: &mut BTreeMap<String, u64>,
) -> Result<AlignedPanel, RunnerError> {
    if let Some(synth) = &config.data.synth {
        let seed = task_seed(config.seed, &["synth-panel"]);
        task_seeds.insert("synth-panel".into(), seed);
        let (panel, _) = generate_synthetic_panel(seed, synth.days, &synth.spec).map_err(|e| {
            match e {
                IngestError::InvalidSpec(_) => RunnerError::Config(e.to_string()),
                other => RunnerError::Data(other.to_string()),
            }
        })?;
        Ok(panel)
    } else {
        let dir = config.data.dir.as_ref().expect("validated: dir xor synth");
        let regions = config.data.regions.as_ref().expect("validated: regions with dir");
        load_panel(&PanelPaths::in_dir(dir), regions).map_err(|e| RunnerError::Data(e.to_string()))
    }
}

pub(crate) struct SocialClustering {
    pub result: ClusterResult,
    pub centroids: Vec<DailyFeatureSeries>,
    pub summary: ClusterSummary,
}

/// Cluster training-span textual features and pick centroid series.
/// Clustering sees only training days, so centroid choice cannot leak
/// evaluation data; the returned series still span the full panel.
pub(crate) fn social_clustering(
    panel: &AlignedPanel,
    config: &RunConfig,
) -> Result<SocialClustering, RunnerError> {
    let train = config.split.train();
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for s in panel.textual() {
        let from = train.start().max(s.start());
        let to = train.end().min(s.end());
        if from > to {
            return Err(RunnerError::Data(format!(
                "textual feature {} does not overlap the training range",
                s.name()
            )));
        }
        let sliced = s.slice(from, to).expect("bounds checked");
        names.push(s.name().to_string());
        cols.push(sliced.values().to_vec());
    }
    let table =
        Table::new(names.clone(), cols).map_err(|e| RunnerError::Data(e.to_string()))?;
    let result = cluster_textual_features(&table).map_err(|e| RunnerError::Data(e.to_string()))?;
    let k = match config.features.social_k {
        SocialK::Fixed(k) => k,
        SocialK::Auto => {
            select_k_elbow(&result.heights()).map_err(|e| RunnerError::Data(e.to_string()))?
        }
    };
    let assignment = result.assignment(k).map_err(|e| RunnerError::Data(e.to_string()))?;
    let centroids = extract_centroids(&result, k, &table, panel.textual())
        .map_err(|e| RunnerError::Data(e.to_string()))?;
    let mut members: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (idx, &cluster) in assignment.iter().enumerate() {
        let prefix = format!("c{cluster:02}_");
        let centroid_name = centroids
            .iter()
            .find(|s| s.name().starts_with(&prefix))
            .map(|s| s.name().to_string())
            .unwrap_or_else(|| format!("c{cluster:02}"));
        members.entry(centroid_name).or_default().push(names[idx].clone());
    }
    Ok(SocialClustering { result, centroids, summary: ClusterSummary { k, members } })
}

// ---------------------------------------------------------------------------
// Model tasks

/// Feature blocks implied by a family name.
pub(crate) fn family_spec(family: &str, features: &FeatureSection) -> FeatureSpec {
    FeatureSpec {
        use_economics: family == "gbm-e" || family == "gbm-es",
        use_social: family == "gbm-s" || family == "gbm-es",
        social_k: features.social_k,
        text_smoothing_window: features.text_smoothing_window,
    }
}

/// Display name of a family in score tables ("gbm-s" -> "GBM-S").
pub(crate) fn model_name(family: &str) -> String {
    family.to_ascii_uppercase()
}

/// The richest enabled family; its noon models feed attribution.
pub(crate) fn shap_family(families: &[String]) -> String {
    FAMILIES
        .iter()
        .rev()
        .find(|&&f| families.iter().any(|g| g.as_str() == f))
        .expect("validated: families nonempty")
        .to_string()
}

fn effective_space(tuning: &TuningSection) -> Option<SearchSpace> {
    match (&tuning.space, tuning.budget) {
        (Some(space), _) => Some(space.clone()),
        (None, 0) => None,
        (None, budget) => Some(SearchSpace::Random(RandomSpace {
            budget,
            n_trees: (60, 250),
            learning_rate: (0.03, 0.25),
            max_depth: (2, 5),
            min_samples_leaf: (5, 30),
            l2_leaf_reg: (0.01, 10.0),
            feature_fraction: (0.7, 1.0),
            row_subsample: (0.7, 1.0),
        })),
    }
}

struct TaskOutput {
    region: String,
    horizon: u32,
    family: String,
    tune_seed: u64,
    fit_seeds: Vec<u64>,
    params: HyperParams,
    score: ScoreRow,
    mu_flat: Vec<f64>,
    sigma_flat: Vec<f64>,
    truth_flat: Vec<f64>,
    shap: Option<Vec<(String, f64)>>,
    model_files: Vec<String>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[allow(clippy::too_many_arguments)]
fn run_task(
    panel: &AlignedPanel,
    config: &RunConfig,
    centroids: &[DailyFeatureSeries],
    out: &Path,
    shap_target: &str,
    region: &str,
    horizon: u32,
    family: &str,
) -> Result<TaskOutput, RunnerError> {
    let task = format!("{region}/h{horizon:02}/{family}");
    let internal =
        |msg: String| RunnerError::Internal { task: task.clone(), msg };

    let spec = family_spec(family, &config.features);
    let matrix = build_design_matrix(
        panel,
        region,
        horizon as usize,
        &spec,
        centroids,
        config.split.train(),
    )
    .map_err(|e| RunnerError::Data(format!("{task}: {e}")))?;
    let parts = split_by_dates(&matrix, &config.split)
        .map_err(|e| RunnerError::Data(format!("{task}: {e}")))?;

    let train_x = PresortedMatrix::new(parts.train.features().clone());
    let h_label = horizon.to_string();

    let tune_seed = task_seed(config.seed, &["tune", region, &h_label, family]);
    let params = match effective_space(&config.tuning) {
        None => HyperParams::default(),
        Some(space) => {
            let train_t: Vec<Vec<f64>> =
                TUNE_HOURS.iter().map(|&h| parts.train.target_hour(h)).collect();
            let val_t: Vec<Vec<f64>> =
                TUNE_HOURS.iter().map(|&h| parts.val.target_hour(h)).collect();
            let (best, _trials) =
                tune(&train_x, &train_t, parts.val.features(), &val_t, &space, tune_seed)
                    .map_err(|e| match e {
                        GbdtError::EmptySpace | GbdtError::InvalidParams(_) => {
                            RunnerError::Config(format!("tuning space: {e}"))
                        }
                        other => internal(format!("tuning: {other}")),
                    })?;
            best
        }
    };

    // One probabilistic model per hour, targets standardized by training
    // statistics so spread estimates stay well conditioned; the attached
    // scale maps predictions back to MW.
    let fits: Vec<(GaussianEnsemble, u64)> = (0..HOURS)
        .into_par_iter()
        .map(|hour| {
            let fit_seed =
                task_seed(config.seed, &["fit", region, &h_label, family, &hour.to_string()]);
            let y = parts.train.target_hour(hour);
            let (mean, sd) = mean_sd(&y);
            let std = if sd > 1e-9 { sd } else { 1.0 };
            let yz: Vec<f64> = y.iter().map(|v| (v - mean) / std).collect();
            let vz: Vec<f64> =
                parts.val.target_hour(hour).iter().map(|v| (v - mean) / std).collect();
            let mut g =
                fit_gaussian(&train_x, &yz, Some((parts.val.features(), &vz)), &params, fit_seed)
                    .map_err(|e| internal(format!("fit hour {hour:02}: {e}")))?;
            g.set_target_scale(TargetScale { mean, std });
            Ok((g, fit_seed))
        })
        .collect::<Result<Vec<_>, RunnerError>>()?;
    let fit_seeds: Vec<u64> = fits.iter().map(|(_, s)| *s).collect();

    let test_x = parts.test.features();
    let n_test = parts.test.n_rows();
    let mut mu_days = vec![[0.0; HOURS]; n_test];
    let mut sigma_days = vec![[0.0; HOURS]; n_test];
    for (hour, (g, _)) in fits.iter().enumerate() {
        let (mu, sigma) =
            g.predict(test_x).map_err(|e| internal(format!("predict hour {hour:02}: {e}")))?;
        for r in 0..n_test {
            mu_days[r][hour] = mu[r];
            sigma_days[r][hour] = sigma[r];
        }
    }

    let truth = parts.test.targets();
    let point = evaluate_point(truth, &mu_days).map_err(|e| match e {
        EvalError::ZeroTruth { .. } => RunnerError::Data(format!("{task}: {e}")),
        other => internal(format!("scoring: {other}")),
    })?;
    let mu_flat: Vec<f64> = mu_days.iter().flat_map(|d| d.iter().copied()).collect();
    let sigma_flat: Vec<f64> = sigma_days.iter().flat_map(|d| d.iter().copied()).collect();
    let truth_flat: Vec<f64> = truth.iter().flat_map(|d| d.iter().copied()).collect();
    let crps =
        crps_batch(&mu_flat, &sigma_flat, &truth_flat).map_err(|e| internal(format!("crps: {e}")))?;
    let score = ScoreRow {
        region: region.to_string(),
        horizon,
        model: model_name(family),
        rmse_mw: point.rmse_mw,
        mape_pct: point.mape_pct,
        crps_mw: Some(crps),
    };

    let shap = if family == shap_target {
        let noon = &fits[12].0;
        let mut m = noon.mu().clone();
        if let Some(scale) = noon.target_scale() {
            m.set_target_scale(scale);
        }
        Some(shap_summary(&m, test_x).map_err(|e| internal(format!("attribution: {e}")))?)
    } else {
        None
    };

    let mut model_files = Vec::new();
    if config.save_models {
        let rel_dir = format!("models/{region}/h{horizon:02}/{family}");
        let dir = out.join(&rel_dir);
        fs::create_dir_all(&dir).map_err(|e| write_err(&dir, e))?;
        for (hour, (g, _)) in fits.into_iter().enumerate() {
            let rel = format!("{rel_dir}/hour{hour:02}.json");
            save_model(&out.join(&rel), &ModelPayload::Gaussian(g))
                .map_err(|e| internal(format!("save {rel}: {e}")))?;
            model_files.push(rel);
        }
    }

    Ok(TaskOutput {
        region: region.to_string(),
        horizon,
        family: family.to_string(),
        tune_seed,
        fit_seeds,
        params,
        score,
        mu_flat,
        sigma_flat,
        truth_flat,
        shap,
        model_files,
    })
}

// ---------------------------------------------------------------------------
// Baselines

/// Score PF, SCF, and their fitted blend on the same test days the base
/// family sees; the blend weights come from the validation span.
fn run_baselines(
    panel: &AlignedPanel,
    config: &RunConfig,
    region: &str,
    horizon: u32,
) -> Result<Vec<ScoreRow>, RunnerError> {
    let task = format!("{region}/h{horizon:02}/baselines");
    let internal = |msg: String| RunnerError::Internal { task: task.clone(), msg };
    let train = config.split.train();

    let spec = FeatureSpec::default();
    let matrix = build_design_matrix(panel, region, horizon as usize, &spec, &[], train)
        .map_err(|e| RunnerError::Data(format!("{task}: {e}")))?;
    let parts = split_by_dates(&matrix, &config.split)
        .map_err(|e| RunnerError::Data(format!("{task}: {e}")))?;

    let forecasts = |part: &DesignMatrix| -> Result<BaselinePair, RunnerError> {
        let mut pf = Vec::with_capacity(part.n_rows());
        let mut scf = Vec::with_capacity(part.n_rows());
        for (r, &issue) in part.issue_dates().iter().enumerate() {
            pf.push(
                persistence_forecast(panel, region, issue, horizon)
                    .map_err(|e| internal(format!("pf {issue}: {e}")))?,
            );
            scf.push(
                climatology_forecast(panel, region, part.target_date(r), &train)
                    .map_err(|e| internal(format!("scf {issue}: {e}")))?,
            );
        }
        Ok((pf, scf))
    };
    let (pf_val, scf_val) = forecasts(&parts.val)?;
    let (pf_test, scf_test) = forecasts(&parts.test)?;
    let combo = combine_pf_scf(&pf_val, &scf_val, parts.val.targets())
        .map_err(|e| internal(format!("blend fit: {e}")))?;
    let pfscf_test: Vec<[f64; HOURS]> =
        pf_test.iter().zip(&scf_test).map(|(p, s)| combo.predict(p, s)).collect();

    let truth = parts.test.targets();
    let mut rows = Vec::new();
    for (name, values) in [("PF", &pf_test), ("SCF", &scf_test), ("PF-SCF", &pfscf_test)] {
        let scores = evaluate_point(truth, values).map_err(|e| match e {
            EvalError::ZeroTruth { .. } => RunnerError::Data(format!("{task}: {e}")),
            other => internal(format!("{name}: {other}")),
        })?;
        rows.push(ScoreRow {
            region: region.to_string(),
            horizon,
            model: name.to_string(),
            rmse_mw: scores.rmse_mw,
            mape_pct: scores.mape_pct,
            crps_mw: None,
        });
    }
    Ok(rows)
}

type BaselinePair = (Vec<[f64; HOURS]>, Vec<[f64; HOURS]>);

// ---------------------------------------------------------------------------
// Causality

#[derive(Serialize)]
pub(crate) struct GrangerCsvRow {
    pub feature: String,
    pub region: String,
    pub direction: &'static str,
    pub lag: usize,
    pub f_stat: f64,
    pub p_value: f64,
    pub relation: &'static str,
}

#[derive(Serialize)]
pub(crate) struct DmlCsvRow {
    pub feature: String,
    pub region: String,
    pub horizon: u32,
    pub delta: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Expand and check the configured textual feature list; absent = all.
pub(crate) fn resolve_causal_features(
    panel: &AlignedPanel,
    config: &RunConfig,
) -> Result<Vec<String>, RunnerError> {
    let available: Vec<&str> = panel.textual().iter().map(|s| s.name()).collect();
    match &config.causality.features {
        None => Ok(available.iter().map(|s| s.to_string()).collect()),
        Some(list) => {
            let mut names: Vec<String> = Vec::new();
            for name in list {
                if !available.contains(&name.as_str()) {
                    return Err(RunnerError::Config(format!(
                        "causality.features: unknown textual feature {name:?}"
                    )));
                }
                if !names.contains(name) {
                    names.push(name.clone());
                }
            }
            names.sort();
            Ok(names)
        }
    }
}

/// Daily mean demand of a region over its fully observed days.
fn daily_mean_demand(
    panel: &AlignedPanel,
    region: &str,
) -> Result<DailyFeatureSeries, RunnerError> {
    let missing = || RunnerError::Data(format!("region {region}: no complete demand days"));
    let demand = panel
        .demand(region)
        .ok_or_else(|| RunnerError::Data(format!("unknown region {region:?}")))?;
    let first = demand.first_full_day().ok_or_else(missing)?;
    let last = demand.last_full_day().ok_or_else(missing)?;
    let mut values = Vec::new();
    let mut d = first;
    while d <= last {
        let profile = demand.day_profile(d).ok_or_else(missing)?;
        values.push(profile.iter().sum::<f64>() / HOURS as f64);
        d = d.succ_opt().expect("date overflow");
    }
    DailyFeatureSeries::new(format!("{region}_demand"), first, values)
        .map_err(|e| RunnerError::Data(e.to_string()))
}

/// Two CSV rows per (feature, region): each direction's statistics plus
/// the shared significance relation.
pub(crate) fn causality_granger(
    panel: &AlignedPanel,
    config: &RunConfig,
    features: &[String],
    regions: &[String],
) -> Result<Vec<GrangerCsvRow>, RunnerError> {
    let mut rows = Vec::new();
    for feature_name in features {
        let feat = panel
            .textual()
            .iter()
            .find(|s| s.name() == feature_name)
            .expect("features resolved against panel");
        for region in regions {
            let demand = daily_mean_demand(panel, region)?;
            let start = feat.start().max(demand.start());
            let end = feat.end().min(demand.end());
            if start > end {
                return Err(RunnerError::Data(format!(
                    "feature {feature_name} and {region} demand do not overlap"
                )));
            }
            let x = feat.slice(start, end).expect("bounds checked");
            let y = demand.slice(start, end).expect("bounds checked");
            let result = granger_test(
                x.values(),
                y.values(),
                config.causality.max_lag,
                config.causality.alpha,
            )
            .map_err(|e| match e {
                CausalityError::TooShort { .. } | CausalityError::ConstantSeries(_) => {
                    RunnerError::Data(format!("granger {feature_name}/{region}: {e}"))
                }
                other => RunnerError::Internal {
                    task: format!("granger/{feature_name}/{region}"),
                    msg: other.to_string(),
                },
            })?;
            let relation = result.direction.as_str();
            for (direction, stat) in
                [("x_to_y", result.x_to_y), ("y_to_x", result.y_to_x)]
            {
                rows.push(GrangerCsvRow {
                    feature: feature_name.clone(),
                    region: region.clone(),
                    direction,
                    lag: stat.lag,
                    f_stat: stat.f_stat,
                    p_value: stat.p_value,
                    relation,
                });
            }
        }
    }
    Ok(rows)
}

/// Treatment-effect profile rows for each (feature, region) pair. A
/// feature whose values are fully determined by the controls cannot be
/// profiled; it is skipped with a note rather than failing the run.
pub(crate) fn causality_dml(
    panel: &AlignedPanel,
    config: &RunConfig,
    features: &[String],
    regions: &[String],
    horizons: &[u32],
) -> Result<Vec<DmlCsvRow>, RunnerError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for f in features {
        for r in regions {
            pairs.push((f.clone(), r.clone()));
        }
    }
    let params = nuisance_params();
    let nested: Vec<Vec<DmlCsvRow>> = pairs
        .par_iter()
        .map(|(feature, region)| {
            match causal_profile(
                panel,
                feature,
                region,
                horizons,
                config.causality.folds,
                &params,
                config.seed,
            ) {
                Ok(profile) => Ok(profile
                    .into_iter()
                    .map(|(h, r)| DmlCsvRow {
                        feature: feature.clone(),
                        region: region.clone(),
                        horizon: h,
                        delta: r.delta,
                        se: r.se,
                        ci_lo: r.ci_lo,
                        ci_hi: r.ci_hi,
                    })
                    .collect()),
                Err(CausalityError::DegenerateTreatment) => {
                    eprintln!(
                        "note: effect profile skipped for {feature} in {region}: \
                         treatment fully determined by controls"
                    );
                    Ok(Vec::new())
                }
                Err(e @ (CausalityError::TooShort { .. } | CausalityError::Misaligned(_))) => {
                    Err(RunnerError::Data(format!("effect profile {feature}/{region}: {e}")))
                }
                Err(other) => Err(RunnerError::Internal {
                    task: format!("dml/{feature}/{region}"),
                    msg: other.to_string(),
                }),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(nested.into_iter().flatten().collect())
}

// ---------------------------------------------------------------------------
// Attribution aggregation

/// Average per-feature importances across tasks, sorted descending with
/// name tie-breaks.
pub(crate) fn average_ranked<'a, I>(lists: I) -> Vec<(String, f64)>
where
    I: Iterator<Item = &'a [(String, f64)]>,
{
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for list in lists {
        for (name, v) in list {
            let e = acc.entry(name.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    let mut rows: Vec<(String, f64)> =
        acc.into_iter().map(|(n, (s, c))| (n, s / c as f64)).collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows
}

// ---------------------------------------------------------------------------
// CSV writers

fn write_err(path: &Path, e: impl Display) -> RunnerError {
    RunnerError::Internal { task: format!("write {}", path.display()), msg: e.to_string() }
}

fn internal_err(task: &str, e: impl Display) -> RunnerError {
    RunnerError::Internal { task: task.to_string(), msg: e.to_string() }
}

/// CSV with an explicit header; headers survive even when there are no
/// rows, so every promised artifact exists with its schema.
pub(crate) fn write_csv_records<T: Serialize>(
    path: &Path,
    header: &[&str],
    rows: &[T],
) -> Result<(), RunnerError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| write_err(path, e))?;
    w.write_record(header).map_err(|e| write_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

pub(crate) fn write_granger_csv(path: &Path, rows: &[GrangerCsvRow]) -> Result<(), RunnerError> {
    write_csv_records(
        path,
        &["feature", "region", "direction", "lag", "f_stat", "p_value", "relation"],
        rows,
    )
}

pub(crate) fn write_dml_csv(path: &Path, rows: &[DmlCsvRow]) -> Result<(), RunnerError> {
    write_csv_records(
        path,
        &["feature", "region", "horizon", "delta", "se", "ci_lo", "ci_hi"],
        rows,
    )
}

#[derive(Serialize)]
struct ShapCsvRow<'a> {
    feature: &'a str,
    mean_abs_shap: f64,
    rank: usize,
}

pub(crate) fn write_shap_csv(path: &Path, ranked: &[(String, f64)]) -> Result<(), RunnerError> {
    let rows: Vec<ShapCsvRow> = ranked
        .iter()
        .enumerate()
        .map(|(i, (name, v))| ShapCsvRow { feature: name, mean_abs_shap: *v, rank: i + 1 })
        .collect();
    write_csv_records(path, &["feature", "mean_abs_shap", "rank"], &rows)
}

#[derive(Serialize)]
struct CalibrationSummaryRow {
    region: String,
    model: String,
    n: usize,
    max_reliability_deviation: f64,
    ks_stat: f64,
}

fn write_calibration_summary(
    path: &Path,
    rows: &[CalibrationSummaryRow],
) -> Result<(), RunnerError> {
    write_csv_records(
        path,
        &["region", "model", "n", "max_reliability_deviation", "ks_stat"],
        rows,
    )
}

#[derive(Serialize)]
struct CalibrationDetailRow {
    kind: &'static str,
    x: f64,
    y: f64,
}

fn pit_histogram(pit: &[f64], bins: usize) -> Vec<(f64, f64)> {
    let mut counts = vec![0usize; bins];
    for &p in pit {
        let b = ((p * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| ((i as f64 + 0.5) / bins as f64, c as f64 / pit.len().max(1) as f64))
        .collect()
}

/// Tidy (kind, x, y) rows: reliability curve, Q-Q points, and a 10-bin
/// PIT histogram.
fn write_calibration_detail(path: &Path, report: &CalibrationReport) -> Result<(), RunnerError> {
    let mut rows: Vec<CalibrationDetailRow> = Vec::new();
    for &(nominal, empirical) in &report.reliability {
        rows.push(CalibrationDetailRow { kind: "reliability", x: nominal, y: empirical });
    }
    for &(theoretical, empirical) in &report.qq {
        rows.push(CalibrationDetailRow { kind: "qq", x: theoretical, y: empirical });
    }
    for (center, freq) in pit_histogram(&report.pit, 10) {
        rows.push(CalibrationDetailRow { kind: "pit_hist", x: center, y: freq });
    }
    write_csv_records(path, &["kind", "x", "y"], &rows)
}

// ---------------------------------------------------------------------------
// Plots

fn write_run_plots(
    out: &Path,
    config: &RunConfig,
    regions: &[String],
    table: &ScoreTable,
    improvements: &[ImprovementRow],
    base_name: &str,
    reports: &[(String, String, CalibrationReport)],
) -> Result<(), RunnerError> {
    let plot_err = |name: &str, e: std::io::Error| write_err(&out.join("plots").join(name), e);

    // MAPE by horizon, one line per model, averaged over regions.
    let mut model_order: Vec<String> = config.families.iter().map(|f| model_name(f)).collect();
    model_order.extend(["PF", "SCF", "PF-SCF"].map(String::from));
    let mut mape_series = Vec::new();
    for model in &model_order {
        let mut points = Vec::new();
        for &h in &config.horizons {
            let vals: Vec<f64> = regions
                .iter()
                .filter_map(|r| table.get(r, h, model).map(|row| row.mape_pct))
                .collect();
            if !vals.is_empty() {
                points.push((h as f64, vals.iter().sum::<f64>() / vals.len() as f64));
            }
        }
        mape_series.push(Series { name: model.clone(), points });
    }
    write_line_chart(
        &out.join("plots/mape_by_horizon.svg"),
        "MAPE by horizon (mean over regions)",
        "horizon (days)",
        "MAPE (%)",
        &mape_series,
        false,
    )
    .map_err(|e| plot_err("mape_by_horizon.svg", e))?;

    // Weekly improvement heatmap for the run's headline comparison.
    let (heat_base, heat_variant) = if config.families.len() >= 2 {
        (base_name.to_string(), model_name(&shap_family(&config.families)))
    } else {
        ("PF-SCF".to_string(), base_name.to_string())
    };
    let heat_rows: Vec<&ImprovementRow> = improvements
        .iter()
        .filter(|r| r.base_model == heat_base && r.variant_model == heat_variant)
        .collect();
    let metrics: Vec<String> = {
        let mut m: Vec<String> = heat_rows.iter().map(|r| r.metric.clone()).collect();
        m.sort();
        m.dedup();
        m
    };
    let col_labels: Vec<String> = WEEK_GROUP_ORDER
        .iter()
        .filter(|g| heat_rows.iter().any(|r| r.horizon_group == **g))
        .map(|g| g.to_string())
        .collect();
    let mut row_labels = Vec::new();
    let mut values = Vec::new();
    for region in regions {
        for metric in &metrics {
            row_labels.push(format!("{region} {metric}"));
            values.push(
                col_labels
                    .iter()
                    .map(|g| {
                        heat_rows
                            .iter()
                            .find(|r| {
                                &r.region == region
                                    && &r.metric == metric
                                    && &r.horizon_group == g
                            })
                            .map_or(0.0, |r| r.improvement_pct)
                    })
                    .collect::<Vec<f64>>(),
            );
        }
    }
    write_heatmap(
        &out.join("plots/improvement_heatmap.svg"),
        &format!("{heat_variant} improvement over {heat_base} (%)"),
        &row_labels,
        &col_labels,
        &values,
    )
    .map_err(|e| plot_err("improvement_heatmap.svg", e))?;

    // Calibration overlays.
    let reliability_series: Vec<Series> = reports
        .iter()
        .map(|(region, family, rep)| Series {
            name: format!("{region} {}", model_name(family)),
            points: rep.reliability.clone(),
        })
        .collect();
    write_line_chart(
        &out.join("plots/reliability.svg"),
        "PIT reliability",
        "nominal probability",
        "empirical frequency",
        &reliability_series,
        true,
    )
    .map_err(|e| plot_err("reliability.svg", e))?;

    let qq_series: Vec<Series> = reports
        .iter()
        .map(|(region, family, rep)| Series {
            name: format!("{region} {}", model_name(family)),
            points: rep.qq.clone(),
        })
        .collect();
    write_line_chart(
        &out.join("plots/qq.svg"),
        "Standardized residual Q-Q",
        "theoretical quantile",
        "empirical quantile",
        &qq_series,
        true,
    )
    .map_err(|e| plot_err("qq.svg", e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Hashing

pub(crate) fn sha256_file(path: &Path) -> Result<String, RunnerError> {
    let bytes = fs::read(path).map_err(|e| write_err(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub(crate) fn read_manifest(run: &Path) -> Result<RunManifest, RunnerError> {
    let path = run.join("manifest.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| RunnerError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| RunnerError::Data(format!("{}: {e}", path.display())))
}
