//! From-scratch gradient-boosted regression trees.
//!
//! Squared-error boosting with exact greedy splits: the deterministic
//! [`Ensemble`] predicts a point value, the [`GaussianEnsemble`] adds a
//! second ensemble over log squared residuals to predict a full (mu, sigma)
//! pair. Desk-scale data (hundreds of rows per fit) makes exact split
//! enumeration affordable, so there is no histogram binning anywhere.

mod ensemble;
mod gaussian;
mod io;
mod tree;
mod tune;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Table;

pub use ensemble::{fit_ensemble, Ensemble, TargetScale};
pub use gaussian::{fit_gaussian, GaussianEnsemble};
pub use io::{load_model, save_model, ModelPayload, FORMAT_VERSION};
pub use tree::{fit_tree, Node, Tree};
pub use tune::{tune, RandomSpace, SearchSpace, TrialRecord};

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("no training rows")]
    EmptyData,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("hyperparameter search space is empty")]
    EmptySpace,
    #[error("feature column {0} missing from prediction input")]
    ColumnMismatch(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model serialization: {0}")]
    Serde(String),
}

/// Boosting hyperparameters. `early_stopping_rounds` only matters when a
/// validation set is supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub l2_leaf_reg: f64,
    pub feature_fraction: f64,
    pub row_subsample: f64,
    pub early_stopping_rounds: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            learning_rate: 0.1,
            max_depth: 4,
            min_samples_leaf: 5,
            l2_leaf_reg: 1.0,
            feature_fraction: 1.0,
            row_subsample: 1.0,
            early_stopping_rounds: 20,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let err = |msg: String| Err(GbdtError::InvalidParams(msg));
        if self.n_trees == 0 {
            return err("n_trees must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return err(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        if self.min_samples_leaf == 0 {
            return err("min_samples_leaf must be >= 1".into());
        }
        if !(self.l2_leaf_reg >= 0.0 && self.l2_leaf_reg.is_finite()) {
            return err(format!("l2_leaf_reg {} must be finite and >= 0", self.l2_leaf_reg));
        }
        for (name, v) in [("feature_fraction", self.feature_fraction), ("row_subsample", self.row_subsample)] {
            if !(v > 0.0 && v <= 1.0) {
                return err(format!("{name} {v} outside (0, 1]"));
            }
        }
        if self.early_stopping_rounds == 0 {
            return err("early_stopping_rounds must be >= 1".into());
        }
        if self.max_depth > 16 {
            return err(format!("max_depth {} unreasonably deep (max 16)", self.max_depth));
        }
        Ok(())
    }
}

/// A feature table plus, per feature, its row indices sorted by value.
///
/// Sorting once per design matrix and sharing it across every tree and every
/// boosting stage is what keeps exact greedy splits affordable.
#[derive(Debug, Clone)]
pub struct PresortedMatrix {
    table: Table,
    order: Vec<Vec<u32>>,
}

impl PresortedMatrix {
    pub fn new(table: Table) -> Self {
        let order = table
            .columns()
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                // Ties resolve by row index for cross-run determinism.
                idx.sort_by(|&a, &b| {
                    col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { table, order }
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn n_rows(&self) -> usize {
        self.table.n_rows()
    }

    pub(crate) fn order(&self, feature: usize) -> &[u32] {
        &self.order[feature]
    }
}
