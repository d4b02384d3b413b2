//! Exact per-feature attributions for the crate's tree ensembles.
//!
//! [`tree_shap`] computes path-dependent SHAP values: the Shapley values of
//! the cover-weighted conditional-expectation game each fitted tree defines,
//! obtained in polynomial time by the path-weight recursion rather than by
//! enumerating coalitions. [`shap_matrix`] batches rows, [`shap_summary`]
//! ranks features by mean absolute attribution, and [`dependence_data`]
//! extracts scatter tuples for one feature colored by another.
//!
//! Attributions satisfy local accuracy: base value plus the row's
//! attributions reproduces the model output to within accumulated rounding.

mod shap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Table;
use crate::gbdt::{Ensemble, GbdtError, TargetScale};

pub use shap::{shap_matrix, tree_shap};

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("tree node with zero cover count; attribution needs the training covers")]
    MissingCovers,
    #[error("bad feature selection: {0}")]
    BadFeature(String),
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
}

/// Attribution matrix for a batch of rows: `value(row, feature)` plus the
/// shared base value. For every row, base + the row's attributions equals
/// the model output the matrix was computed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    feature_names: Vec<String>,
    base: f64,
    values: Vec<Vec<f64>>,
}

impl ShapMatrix {
    pub(crate) fn new(feature_names: Vec<String>, base: f64, values: Vec<Vec<f64>>) -> Self {
        Self { feature_names, base, values }
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.values[row][feature]
    }

    /// Map attributions from model units into output units: the base value
    /// is rescaled and shifted, per-feature attributions only rescaled, so
    /// local accuracy carries over to the rescaled predictions.
    pub fn in_output_units(&self, scale: &TargetScale) -> ShapMatrix {
        let values = self
            .values
            .iter()
            .map(|row| row.iter().map(|v| v * scale.std).collect())
            .collect();
        ShapMatrix {
            feature_names: self.feature_names.clone(),
            base: self.base * scale.std + scale.mean,
            values,
        }
    }

    /// Mean absolute attribution per feature, in the matrix's units.
    pub fn mean_abs(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.feature_names.len()];
        for row in &self.values {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v.abs();
            }
        }
        let n = self.values.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Features ranked by mean absolute attribution over `x`, descending, in
/// the ensemble's output units. Equal importances order by feature name.
pub fn shap_summary(
    e: &Ensemble,
    x: &Table,
) -> Result<Vec<(String, f64)>, AttributionError> {
    if x.n_rows() == 0 {
        return Err(AttributionError::Misaligned("no rows to summarize".into()));
    }
    let matrix = shap_matrix(e, x)?.in_output_units(&e.target_scale().unwrap_or_default());
    let importance = matrix.mean_abs();
    let mut ranked: Vec<(String, f64)> = matrix
        .feature_names
        .iter()
        .cloned()
        .zip(importance)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Scatter tuples `(x_i, phi_i, x_j)` for a dependence plot of feature `i`
/// colored by feature `j`.
pub fn dependence_data(
    x: &Table,
    shap: &ShapMatrix,
    i: usize,
    j: usize,
) -> Result<Vec<(f64, f64, f64)>, AttributionError> {
    let p = shap.feature_names.len();
    for idx in [i, j] {
        if idx >= p {
            return Err(AttributionError::BadFeature(format!(
                "feature index {idx} out of range for {p} features"
            )));
        }
    }
    if i == j {
        return Err(AttributionError::BadFeature(format!(
            "dependence needs two distinct features, got {i} twice"
        )));
    }
    if x.names() != shap.feature_names.as_slice() {
        return Err(AttributionError::Misaligned(
            "table columns do not match the attribution matrix".into(),
        ));
    }
    if x.n_rows() != shap.n_rows() {
        return Err(AttributionError::Misaligned(format!(
            "{} table rows vs {} attribution rows",
            x.n_rows(),
            shap.n_rows()
        )));
    }
    Ok((0..x.n_rows())
        .map(|r| (x.value(r, i), shap.value(r, i), x.value(r, j)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::{fit_ensemble, HyperParams, PresortedMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(cols: Vec<Vec<f64>>) -> Table {
        let names = (0..cols.len()).map(|i| format!("f{i}")).collect();
        Table::new(names, cols).unwrap()
    }

    fn fit(x: &Table, y: &[f64], params: &HyperParams, seed: u64) -> Ensemble {
        let sorted = PresortedMatrix::new(x.clone());
        fit_ensemble(&sorted, y, None, params, seed).unwrap()
    }

    fn slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let var: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        cov / var
    }

    #[test]
    fn summary_puts_the_only_used_feature_first_and_breaks_ties_by_name() {
        // f0 carries the signal; f1 and f2 are constant so both sit at
        // exactly zero importance and order alphabetically.
        let x = table(vec![
            vec![0.0, 0.1, 0.2, 0.8, 0.9, 1.0],
            vec![3.0; 6],
            vec![1.0; 6],
        ]);
        let y = vec![0.0, 0.0, 0.0, 10.0, 10.0, 10.0];
        let params = HyperParams { n_trees: 5, min_samples_leaf: 1, ..Default::default() };
        let e = fit(&x, &y, &params, 11);
        let ranked = shap_summary(&e, &x).unwrap();
        assert_eq!(ranked[0].0, "f0");
        assert!(ranked[0].1 > 0.0);
        assert_eq!(ranked[1], ("f1".to_string(), 0.0));
        assert_eq!(ranked[2], ("f2".to_string(), 0.0));
    }

    #[test]
    fn summary_scales_with_the_ensemble_target_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 80;
        let cols: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let x = table(cols);
        let y: Vec<f64> = (0..n).map(|r| 2.0 * x.value(r, 0) + x.value(r, 1)).collect();
        let mut e = fit(&x, &y, &HyperParams { n_trees: 25, ..Default::default() }, 13);
        let raw = shap_summary(&e, &x).unwrap();
        e.set_target_scale(crate::gbdt::TargetScale { mean: 500.0, std: 40.0 });
        let mw = shap_summary(&e, &x).unwrap();
        for (r, m) in raw.iter().zip(&mw) {
            assert_eq!(r.0, m.0);
            assert!((m.1 - r.1 * 40.0).abs() < 1e-9, "{} vs {}", m.1, r.1 * 40.0);
        }
    }

    #[test]
    fn summary_rejects_an_empty_table() {
        let x = table(vec![vec![0.0, 1.0]]);
        let e = fit(&x, &[0.0, 1.0], &HyperParams::default(), 1);
        let empty = table(vec![vec![]]);
        assert!(matches!(shap_summary(&e, &empty), Err(AttributionError::Misaligned(_))));
    }

    #[test]
    fn dependence_tuples_mirror_the_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 50;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let x = table(cols);
        let y: Vec<f64> = (0..n).map(|r| x.value(r, 0) * 4.0).collect();
        let e = fit(&x, &y, &HyperParams { n_trees: 10, ..Default::default() }, 15);
        let matrix = shap_matrix(&e, &x).unwrap();
        let tuples = dependence_data(&x, &matrix, 0, 2).unwrap();
        assert_eq!(tuples.len(), n);
        for (r, t) in tuples.iter().enumerate() {
            assert_eq!(t.0, x.value(r, 0));
            assert_eq!(t.1, matrix.value(r, 0));
            assert_eq!(t.2, x.value(r, 2));
        }
        assert!(matches!(
            dependence_data(&x, &matrix, 1, 1),
            Err(AttributionError::BadFeature(_))
        ));
        assert!(matches!(
            dependence_data(&x, &matrix, 0, 9),
            Err(AttributionError::BadFeature(_))
        ));
        let other = table(vec![vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]]);
        assert!(matches!(
            dependence_data(&other, &matrix, 0, 1),
            Err(AttributionError::Misaligned(_))
        ));
    }

    #[test]
    fn planted_interaction_splits_the_dependence_slope_by_color_group() {
        // y = f0 only where f1 < 0.5 (half the rows). Exact Shapley for
        // that game: phi_f0 = 0.75*f0 in the active color group and
        // 0.25*f0 in the inactive one, so the dependence slopes separate.
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let n = 400;
        let f0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = f0
            .iter()
            .zip(&f1)
            .map(|(a, b)| if *b < 0.5 { *a } else { 0.0 })
            .collect();
        let x = table(vec![f0, f1]);
        let params = HyperParams {
            n_trees: 80,
            max_depth: 3,
            min_samples_leaf: 5,
            ..Default::default()
        };
        let e = fit(&x, &y, &params, 17);
        let matrix = shap_matrix(&e, &x).unwrap();
        let tuples = dependence_data(&x, &matrix, 0, 1).unwrap();
        let active: Vec<(f64, f64)> =
            tuples.iter().filter(|t| t.2 < 0.5).map(|t| (t.0, t.1)).collect();
        let inactive: Vec<(f64, f64)> =
            tuples.iter().filter(|t| t.2 >= 0.5).map(|t| (t.0, t.1)).collect();
        let s_active = slope(&active);
        let s_inactive = slope(&inactive);
        assert!((s_active - 0.75).abs() < 0.08, "active slope {s_active}");
        assert!((s_inactive - 0.25).abs() < 0.08, "inactive slope {s_inactive}");
    }
}
