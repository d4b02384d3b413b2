use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Table;
use crate::stats::mean;

use super::tree::{fit_tree, Tree};
use super::{GbdtError, HyperParams, PresortedMatrix};

/// Affine transform mapping standardized model outputs back to target units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub fn to_unit(&self, standardized: f64) -> f64 {
        standardized * self.std + self.mean
    }
}

impl Default for TargetScale {
    /// Identity transform: model units are already target units.
    fn default() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }
}

/// Boosted point-forecast ensemble: `base_score` plus shrunk tree outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    base_score: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
    feature_names: Vec<String>,
    target_scale: Option<TargetScale>,
    train_curve: Vec<f64>,
    val_curve: Vec<f64>,
}

impl Ensemble {
    /// A treeless ensemble that predicts `base_score` everywhere. Used as
    /// the degenerate fallback when boosting has nothing to learn.
    pub fn constant(base_score: f64, feature_names: Vec<String>) -> Self {
        Self {
            base_score,
            learning_rate: 0.0,
            trees: Vec::new(),
            feature_names,
            target_scale: None,
            train_curve: Vec::new(),
            val_curve: Vec::new(),
        }
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Training MSE after each boosting stage.
    pub fn train_curve(&self) -> &[f64] {
        &self.train_curve
    }

    /// Validation MSE after each boosting stage; empty without a val set.
    pub fn val_curve(&self) -> &[f64] {
        &self.val_curve
    }

    pub fn target_scale(&self) -> Option<TargetScale> {
        self.target_scale
    }

    pub fn set_target_scale(&mut self, scale: TargetScale) {
        self.target_scale = Some(scale);
    }

    /// Raw model-space output for one row addressed by feature index.
    pub fn predict_row_raw(&self, get: &impl Fn(usize) -> f64) -> f64 {
        let mut acc = self.base_score;
        for tree in &self.trees {
            acc += self.learning_rate * tree.predict_row(get);
        }
        acc
    }

    /// Predict every row of `x`, mapping back to target units when a
    /// target scale is attached. Columns must match training by name and
    /// position.
    pub fn predict(&self, x: &Table) -> Result<Vec<f64>, GbdtError> {
        self.check_columns(x)?;
        let out = (0..x.n_rows())
            .map(|r| {
                let raw = self.predict_row_raw(&|f| x.value(r, f));
                match self.target_scale {
                    Some(s) => s.to_unit(raw),
                    None => raw,
                }
            })
            .collect();
        Ok(out)
    }

    pub(crate) fn check_columns(&self, x: &Table) -> Result<(), GbdtError> {
        if x.names() == self.feature_names {
            return Ok(());
        }
        for (i, name) in self.feature_names.iter().enumerate() {
            if x.names().get(i) != Some(name) {
                return Err(GbdtError::ColumnMismatch(name.clone()));
            }
        }
        Err(GbdtError::ColumnMismatch(format!(
            "expected {} columns, got {}",
            self.feature_names.len(),
            x.n_cols()
        )))
    }
}

/// Fit a boosted ensemble of regression trees on squared error.
///
/// Boosting starts from the target mean and fits each tree to the current
/// residuals. When `val` is given, fitting stops once validation MSE has
/// not improved for `early_stopping_rounds` consecutive trees, and the
/// ensemble is truncated back to its best iteration. With full row
/// sampling the training MSE curve is nonincreasing by construction.
pub fn fit_ensemble(
    train: &PresortedMatrix,
    y: &[f64],
    val: Option<(&Table, &[f64])>,
    params: &HyperParams,
    seed: u64,
) -> Result<Ensemble, GbdtError> {
    params.validate()?;
    let n = train.n_rows();
    if n == 0 || y.is_empty() {
        return Err(GbdtError::EmptyData);
    }
    if y.len() != n {
        return Err(GbdtError::DegenerateData(format!(
            "{} targets for {} rows",
            y.len(),
            n
        )));
    }
    if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
        return Err(GbdtError::DegenerateData(format!("non-finite target at row {bad}")));
    }
    if let Some((xv, yv)) = val {
        if xv.n_rows() != yv.len() {
            return Err(GbdtError::DegenerateData(format!(
                "{} val targets for {} val rows",
                yv.len(),
                xv.n_rows()
            )));
        }
        if xv.names() != train.table().names() {
            return Err(GbdtError::ColumnMismatch(
                "validation columns differ from training columns".into(),
            ));
        }
        if xv.n_rows() == 0 {
            return Err(GbdtError::DegenerateData("empty validation set".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = mean(y);
    let mut residuals: Vec<f64> = y.iter().map(|&v| v - base).collect();
    let mut trees: Vec<Tree> = Vec::new();
    let mut train_curve = Vec::new();
    let mut val_curve = Vec::new();

    let mut val_pred: Vec<f64> = val.map(|(xv, _)| vec![base; xv.n_rows()]).unwrap_or_default();
    let mut best_val = f64::INFINITY;
    let mut best_n = 0usize;

    for _ in 0..params.n_trees {
        let tree = fit_tree(train, &residuals, params, &mut rng)?;
        let xt = train.table();
        for r in 0..n {
            residuals[r] -= params.learning_rate * tree.predict_row(&|f| xt.value(r, f));
        }
        train_curve.push(residuals.iter().map(|r| r * r).sum::<f64>() / n as f64);
        trees.push(tree);

        if let Some((xv, yv)) = val {
            let tree = trees.last().expect("just pushed");
            let mut sse = 0.0;
            for r in 0..xv.n_rows() {
                val_pred[r] += params.learning_rate * tree.predict_row(&|f| xv.value(r, f));
                let e = yv[r] - val_pred[r];
                sse += e * e;
            }
            let mse = sse / xv.n_rows() as f64;
            val_curve.push(mse);
            if mse < best_val {
                best_val = mse;
                best_n = trees.len();
            } else if trees.len() - best_n >= params.early_stopping_rounds {
                break;
            }
        }
    }

    if val.is_some() {
        trees.truncate(best_n);
        train_curve.truncate(best_n);
        val_curve.truncate(best_n);
    }

    Ok(Ensemble {
        base_score: base,
        learning_rate: params.learning_rate,
        trees,
        feature_names: train.table().names().to_vec(),
        target_scale: None,
        train_curve,
        val_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn table(cols: Vec<Vec<f64>>) -> Table {
        let names = (0..cols.len()).map(|i| format!("f{i}")).collect();
        Table::new(names, cols).unwrap()
    }

    fn wavy_problem(n: usize, seed: u64, noise: f64) -> (Table, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| x0[i].sin() * 2.0 + 0.5 * x1[i] + noise * rng.random_range(-1.0..1.0))
            .collect();
        (table(vec![x0, x1]), y)
    }

    #[test]
    fn constant_targets_predict_constant() {
        let (x, _) = wavy_problem(40, 1, 0.0);
        let y = vec![7.5; 40];
        let model =
            fit_ensemble(&PresortedMatrix::new(x.clone()), &y, None, &HyperParams::default(), 0)
                .unwrap();
        for p in model.predict(&x).unwrap() {
            assert!((p - 7.5).abs() < 1e-12);
        }
    }

    #[test]
    fn treeless_ensemble_predicts_base_score() {
        let model = Ensemble::constant(42.0, vec!["f0".into()]);
        let x = table(vec![vec![-1.0, 0.0, 5.0]]);
        assert_eq!(model.predict(&x).unwrap(), vec![42.0; 3]);
    }

    #[test]
    fn train_mse_nonincreasing_without_row_subsampling() {
        let (x, y) = wavy_problem(120, 2, 0.3);
        let params = HyperParams { n_trees: 80, row_subsample: 1.0, ..Default::default() };
        let model = fit_ensemble(&PresortedMatrix::new(x), &y, None, &params, 3).unwrap();
        let curve = model.train_curve();
        assert_eq!(curve.len(), 80);
        for w in curve.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "train MSE rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn full_rate_deep_trees_interpolate_noiseless_data() {
        let (x, y) = wavy_problem(50, 3, 0.0);
        let params = HyperParams {
            n_trees: 60,
            learning_rate: 1.0,
            max_depth: 6,
            min_samples_leaf: 1,
            l2_leaf_reg: 0.0,
            ..Default::default()
        };
        let model = fit_ensemble(&PresortedMatrix::new(x.clone()), &y, None, &params, 4).unwrap();
        let pred = model.predict(&x).unwrap();
        let mse = pred
            .iter()
            .zip(&y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / y.len() as f64;
        assert!(mse < 1e-6, "interpolation mse {mse}");
    }

    #[test]
    fn same_seed_reproduces_identical_model() {
        let (x, y) = wavy_problem(90, 5, 0.2);
        let params = HyperParams {
            n_trees: 30,
            feature_fraction: 0.5,
            row_subsample: 0.7,
            ..Default::default()
        };
        let pre = PresortedMatrix::new(x);
        let a = fit_ensemble(&pre, &y, None, &params, 11).unwrap();
        let b = fit_ensemble(&pre, &y, None, &params, 11).unwrap();
        assert_eq!(a, b);
        let c = fit_ensemble(&pre, &y, None, &params, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn early_stopping_truncates_to_best_iteration() {
        let (x, y) = wavy_problem(150, 6, 0.8);
        let (xv, yv) = wavy_problem(60, 7, 0.8);
        let params = HyperParams {
            n_trees: 400,
            learning_rate: 0.3,
            max_depth: 6,
            min_samples_leaf: 1,
            l2_leaf_reg: 0.0,
            early_stopping_rounds: 10,
            ..Default::default()
        };
        let model =
            fit_ensemble(&PresortedMatrix::new(x), &y, Some((&xv, &yv)), &params, 8).unwrap();
        let curve = model.val_curve();
        assert!(model.trees().len() < 400, "expected early stop, kept all trees");
        assert_eq!(model.trees().len(), curve.len());
        let best = curve
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i + 1)
            .unwrap();
        assert_eq!(model.trees().len(), best);
    }

    #[test]
    fn predictions_match_manual_tree_traversal() {
        let (x, y) = wavy_problem(70, 9, 0.1);
        let params = HyperParams { n_trees: 25, ..Default::default() };
        let model = fit_ensemble(&PresortedMatrix::new(x.clone()), &y, None, &params, 10).unwrap();
        let pred = model.predict(&x).unwrap();
        for r in 0..x.n_rows() {
            let mut manual = model.base_score();
            for tree in model.trees() {
                manual += model.learning_rate() * tree.predict_row(&|f| x.value(r, f));
            }
            assert!((pred[r] - manual).abs() < 1e-12);
        }
    }

    #[test]
    fn target_scale_maps_predictions_to_unit_space() {
        let (x, y_std) = wavy_problem(60, 12, 0.1);
        let pre = PresortedMatrix::new(x.clone());
        let params = HyperParams { n_trees: 20, ..Default::default() };
        let mut model = fit_ensemble(&pre, &y_std, None, &params, 1).unwrap();
        let raw = model.predict(&x).unwrap();
        model.set_target_scale(TargetScale { mean: 1000.0, std: 250.0 });
        let scaled = model.predict(&x).unwrap();
        for (r, s) in raw.iter().zip(&scaled) {
            assert!((s - (r * 250.0 + 1000.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn prediction_rejects_mismatched_columns() {
        let (x, y) = wavy_problem(40, 13, 0.1);
        let model = fit_ensemble(
            &PresortedMatrix::new(x.clone()),
            &y,
            None,
            &HyperParams { n_trees: 5, ..Default::default() },
            2,
        )
        .unwrap();
        let renamed = Table::new(
            vec!["a".into(), "f1".into()],
            x.columns().to_vec(),
        )
        .unwrap();
        assert!(matches!(
            model.predict(&renamed).unwrap_err(),
            GbdtError::ColumnMismatch(_)
        ));
    }
}
