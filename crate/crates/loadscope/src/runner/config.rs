//! Experiment configuration: one file describes the data source, split,
//! model variants, tuning effort, and causal-analysis options for a run.
//!
//! The on-disk format is TOML (nested key/value sections); JSON with the
//! same shape is accepted interchangeably, and a finished run's
//! `manifest.json` can itself be passed back as a config, since the
//! manifest embeds the config it ran under.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SplitSpec;
use crate::features::SocialK;
use crate::gbdt::SearchSpace;
use crate::ingest::SynthSpec;

use super::RunnerError;

/// Model families, poorest to richest feature set. Configs may list them
/// in any case or order; validation normalizes to this order.
pub const FAMILIES: [&str; 4] = ["gbm", "gbm-e", "gbm-s", "gbm-es"];

/// Full definition of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; every stochastic task derives its own seed from it.
    pub seed: u64,
    /// Output directory for all artifacts.
    pub out: PathBuf,
    /// Worker threads, 0 = scheduler default. Runtime knob only: it never
    /// changes outputs, so echoed configs omit it.
    #[serde(default, skip_serializing)]
    pub jobs: usize,
    /// Forecast horizons in days, each in 1..=30.
    pub horizons: Vec<u32>,
    /// Model families to train, subset of [`FAMILIES`].
    pub families: Vec<String>,
    /// Persist every trained model under `out/models/`.
    #[serde(default = "default_true")]
    pub save_models: bool,
    pub data: DataSection,
    pub split: SplitSpec,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub tuning: TuningSection,
    #[serde(default)]
    pub causality: CausalitySection,
}

fn default_true() -> bool {
    true
}

/// Where the input panel comes from: a directory of CSV files or the
/// synthetic generator. Exactly one must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Directory holding demand.csv, temperature.csv, text_features.csv,
    /// econ.csv, and holidays.csv.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Region -> city map for CSV inputs; required with `dir`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSection>,
}

/// Synthetic panel request: the day count plus generator knobs. Generator
/// fields sit inline in this section and all have defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSection {
    pub days: usize,
    #[serde(flatten)]
    pub spec: SynthSpec,
}

/// Options shared by the social-factor (textual) feature block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSection {
    /// Cluster count for social factors: an integer or "auto" (elbow rule).
    pub social_k: SocialK,
    /// Trailing mean window in days applied to social factors; 1 = none.
    pub text_smoothing_window: usize,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self { social_k: SocialK::Auto, text_smoothing_window: 1 }
    }
}

/// Hyperparameter search effort per (region, horizon, family) task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TuningSection {
    /// Random-search trials; 0 with no explicit space skips tuning and
    /// fits library-default hyperparameters.
    pub budget: usize,
    /// Explicit candidate space; takes precedence over `budget`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<SearchSpace>,
}

/// Granger-test and treatment-effect options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CausalitySection {
    pub enabled: bool,
    /// Max autoregressive order considered by the lag search.
    pub max_lag: usize,
    /// Significance level for the Granger relation column.
    pub alpha: f64,
    /// Cross-fitting folds for treatment-effect estimation.
    pub folds: usize,
    /// Textual features to analyze; absent = all of them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
    /// Horizons for the effect profile; absent = the run's horizons.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<u32>>,
}

impl Default for CausalitySection {
    fn default() -> Self {
        Self { enabled: true, max_lag: 7, alpha: 0.05, folds: 5, features: None, horizons: None }
    }
}

impl RunConfig {
    /// Check and normalize the config: families lowercased and put in
    /// canonical order, horizons sorted and deduplicated.
    pub fn validate(&mut self) -> Result<(), RunnerError> {
        if self.horizons.is_empty() {
            return Err(RunnerError::Config("horizons must not be empty".into()));
        }
        if let Some(h) = self.horizons.iter().find(|h| !(1..=30).contains(*h)) {
            return Err(RunnerError::Config(format!("horizon {h} outside 1..=30")));
        }
        self.horizons.sort_unstable();
        self.horizons.dedup();

        if self.families.is_empty() {
            return Err(RunnerError::Config("families must not be empty".into()));
        }
        let mut normalized: Vec<String> = Vec::new();
        for f in &self.families {
            let f = f.to_ascii_lowercase();
            if !FAMILIES.contains(&f.as_str()) {
                return Err(RunnerError::Config(format!(
                    "unknown family {f:?}; expected one of {FAMILIES:?}"
                )));
            }
            if !normalized.contains(&f) {
                normalized.push(f);
            }
        }
        normalized.sort_by_key(|f| FAMILIES.iter().position(|k| k == f));
        self.families = normalized;

        match (&self.data.dir, &self.data.synth) {
            (Some(_), Some(_)) => {
                return Err(RunnerError::Config(
                    "data.dir and data.synth are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(RunnerError::Config("set either data.dir or data.synth".into()))
            }
            (Some(_), None) => {
                let ok = self.data.regions.as_ref().is_some_and(|m| !m.is_empty());
                if !ok {
                    return Err(RunnerError::Config(
                        "data.dir requires a non-empty data.regions map".into(),
                    ));
                }
            }
            (None, Some(_)) => {
                if self.data.regions.is_some() {
                    return Err(RunnerError::Config(
                        "data.regions only applies to data.dir inputs".into(),
                    ));
                }
            }
        }

        if self.features.text_smoothing_window == 0 {
            return Err(RunnerError::Config("text_smoothing_window must be >= 1".into()));
        }
        if let SocialK::Fixed(k) = self.features.social_k {
            if k < 2 {
                return Err(RunnerError::Config(format!("social_k {k} must be >= 2")));
            }
        }
        match &self.tuning.space {
            Some(SearchSpace::Grid(g)) if g.is_empty() => {
                return Err(RunnerError::Config("tuning.space grid is empty".into()))
            }
            Some(SearchSpace::Random(r)) if r.budget == 0 => {
                return Err(RunnerError::Config("tuning.space random budget is 0".into()))
            }
            _ => {}
        }

        let c = &self.causality;
        if c.max_lag == 0 {
            return Err(RunnerError::Config("causality.max_lag must be >= 1".into()));
        }
        if !(c.alpha > 0.0 && c.alpha < 1.0) {
            return Err(RunnerError::Config(format!("causality.alpha {} outside (0, 1)", c.alpha)));
        }
        if c.folds < 2 {
            return Err(RunnerError::Config("causality.folds must be >= 2".into()));
        }
        if let Some(hs) = &c.horizons {
            if let Some(h) = hs.iter().find(|h| !(1..=30).contains(*h)) {
                return Err(RunnerError::Config(format!("causality horizon {h} outside 1..=30")));
            }
        }
        Ok(())
    }
}

/// Wrapper shape of manifest.json; extra manifest fields are ignored.
#[derive(Deserialize)]
struct ConfigEnvelope {
    config: RunConfig,
}

/// Load a config from TOML or JSON, accepting a run manifest in place of
/// a bare config. The parse is strict: unknown keys are errors everywhere
/// except inside `data.synth`, whose generator fields are open-ended.
pub fn load_config(path: &Path) -> Result<RunConfig, RunnerError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
    let looks_json = path.extension().is_some_and(|x| x == "json")
        || text.trim_start().starts_with('{');
    let mut config = if looks_json {
        parse_json(&text)
    } else {
        toml::from_str::<RunConfig>(&text).map_err(|e| e.to_string())
    }
    .map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

fn parse_json(text: &str) -> Result<RunConfig, String> {
    match serde_json::from_str::<RunConfig>(text) {
        Ok(c) => Ok(c),
        Err(bare_err) => serde_json::from_str::<ConfigEnvelope>(text)
            .map(|m| m.config)
            .map_err(|_| bare_err.to_string()),
    }
}
