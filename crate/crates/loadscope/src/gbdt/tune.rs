use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Table;
use crate::stats::task_seed;

use super::ensemble::fit_ensemble;
use super::{GbdtError, HyperParams, PresortedMatrix};

/// Random-search ranges. Integer ranges are inclusive and sampled
/// uniformly; `learning_rate` and `l2_leaf_reg` sample log-uniformly, the
/// fractions uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomSpace {
    pub budget: usize,
    pub n_trees: (usize, usize),
    pub learning_rate: (f64, f64),
    pub max_depth: (usize, usize),
    pub min_samples_leaf: (usize, usize),
    pub l2_leaf_reg: (f64, f64),
    pub feature_fraction: (f64, f64),
    pub row_subsample: (f64, f64),
}

impl Default for RandomSpace {
    fn default() -> Self {
        Self {
            budget: 20,
            n_trees: (100, 400),
            learning_rate: (0.02, 0.3),
            max_depth: (2, 6),
            min_samples_leaf: (2, 30),
            l2_leaf_reg: (1e-2, 10.0),
            feature_fraction: (0.6, 1.0),
            row_subsample: (0.6, 1.0),
        }
    }
}

impl RandomSpace {
    fn validate(&self) -> Result<(), GbdtError> {
        if self.budget == 0 {
            return Err(GbdtError::EmptySpace);
        }
        let ord_int = [
            ("n_trees", self.n_trees),
            ("max_depth", self.max_depth),
            ("min_samples_leaf", self.min_samples_leaf),
        ];
        for (name, (lo, hi)) in ord_int {
            if lo > hi {
                return Err(GbdtError::InvalidParams(format!("{name} range {lo}..={hi}")));
            }
        }
        let log_ranges = [("learning_rate", self.learning_rate), ("l2_leaf_reg", self.l2_leaf_reg)];
        for (name, (lo, hi)) in log_ranges {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(GbdtError::InvalidParams(format!(
                    "{name} log-uniform range ({lo}, {hi}) needs 0 < lo <= hi"
                )));
            }
        }
        let lin_ranges =
            [("feature_fraction", self.feature_fraction), ("row_subsample", self.row_subsample)];
        for (name, (lo, hi)) in lin_ranges {
            if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                return Err(GbdtError::InvalidParams(format!(
                    "{name} range ({lo}, {hi}) needs 0 < lo <= hi <= 1"
                )));
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> HyperParams {
        // Draw order is part of the reproducibility contract; keep fixed.
        let int = |rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)| {
            if lo == hi { lo } else { rng.random_range(lo..=hi) }
        };
        let log = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            if lo == hi { lo } else { (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp() }
        };
        let lin = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            if lo == hi { lo } else { rng.random_range(lo..hi) }
        };
        HyperParams {
            n_trees: int(rng, self.n_trees),
            learning_rate: log(rng, self.learning_rate),
            max_depth: int(rng, self.max_depth),
            min_samples_leaf: int(rng, self.min_samples_leaf),
            l2_leaf_reg: log(rng, self.l2_leaf_reg),
            feature_fraction: lin(rng, self.feature_fraction),
            row_subsample: lin(rng, self.row_subsample),
            ..Default::default()
        }
    }
}

/// Candidate generator for [`tune`]: random draws or an explicit grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "spec", rename_all = "snake_case")]
pub enum SearchSpace {
    Random(RandomSpace),
    Grid(Vec<HyperParams>),
}

/// One evaluated candidate: the parameters and their validation MSE
/// averaged over the tuned target columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub params: HyperParams,
    pub val_mse: f64,
}

/// Pick hyperparameters by validation MSE.
///
/// Each candidate fits one ensemble per target column (with early stopping
/// against the matching validation column) and scores the mean of the
/// columns' best validation MSEs. The first trial wins ties. Fit seeds
/// derive from `seed`, the trial index, and the column index, so results
/// are reproducible regardless of trial order or thread count.
pub fn tune(
    train: &PresortedMatrix,
    train_targets: &[Vec<f64>],
    val: &Table,
    val_targets: &[Vec<f64>],
    space: &SearchSpace,
    seed: u64,
) -> Result<(HyperParams, Vec<TrialRecord>), GbdtError> {
    if train_targets.is_empty() || train_targets.len() != val_targets.len() {
        return Err(GbdtError::DegenerateData(format!(
            "{} train target columns vs {} validation target columns",
            train_targets.len(),
            val_targets.len()
        )));
    }
    let candidates: Vec<HyperParams> = match space {
        SearchSpace::Random(rs) => {
            rs.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(task_seed(seed, &["tune", "draws"]));
            (0..rs.budget).map(|_| rs.draw(&mut rng)).collect()
        }
        SearchSpace::Grid(grid) => {
            if grid.is_empty() {
                return Err(GbdtError::EmptySpace);
            }
            for p in grid {
                p.validate()?;
            }
            grid.clone()
        }
    };

    let mut trials = Vec::with_capacity(candidates.len());
    for (t, params) in candidates.into_iter().enumerate() {
        let mut total = 0.0;
        for (c, (yt, yv)) in train_targets.iter().zip(val_targets).enumerate() {
            let fit_seed = task_seed(seed, &["tune", &t.to_string(), &c.to_string()]);
            let model = fit_ensemble(train, yt, Some((val, yv)), &params, fit_seed)?;
            let best = model
                .val_curve()
                .last()
                .copied()
                .ok_or_else(|| GbdtError::DegenerateData("empty validation curve".into()))?;
            total += best;
        }
        trials.push(TrialRecord { params, val_mse: total / train_targets.len() as f64 });
    }

    let best = trials
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.val_mse.total_cmp(&b.val_mse).then(ia.cmp(ib)))
        .map(|(_, t)| t.params.clone())
        .expect("at least one trial");
    Ok((best, trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_split() -> (PresortedMatrix, Vec<Vec<f64>>, Table, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let make = |rng: &mut ChaCha8Rng, n: usize| -> (Table, Vec<f64>, Vec<f64>) {
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let ya = x0.iter().map(|v| v.signum() + 0.1 * v).collect();
            let yb = x0.iter().map(|v| 2.0 * v.cos()).collect();
            (Table::new(vec!["f0".into()], vec![x0]).unwrap(), ya, yb)
        };
        let (xt, ya_t, yb_t) = make(&mut rng, 80);
        let (xv, ya_v, yb_v) = make(&mut rng, 40);
        (PresortedMatrix::new(xt), vec![ya_t, yb_t], xv, vec![ya_v, yb_v])
    }

    #[test]
    fn budget_one_returns_its_single_trial() {
        let (xt, yt, xv, yv) = toy_split();
        let space = SearchSpace::Random(RandomSpace {
            budget: 1,
            n_trees: (10, 20),
            ..Default::default()
        });
        let (best, trials) = tune(&xt, &yt, &xv, &yv, &space, 1).unwrap();
        assert_eq!(trials.len(), 1);
        assert_eq!(best, trials[0].params);
    }

    #[test]
    fn grid_search_returns_lowest_validation_mse() {
        let (xt, yt, xv, yv) = toy_split();
        let strong = HyperParams { n_trees: 60, max_depth: 3, ..Default::default() };
        let weak = HyperParams {
            n_trees: 1,
            max_depth: 0,
            learning_rate: 0.01,
            ..Default::default()
        };
        let space = SearchSpace::Grid(vec![weak.clone(), strong.clone()]);
        let (best, trials) = tune(&xt, &yt, &xv, &yv, &space, 2).unwrap();
        assert_eq!(trials.len(), 2);
        assert!(trials[1].val_mse < trials[0].val_mse);
        assert_eq!(best, strong);
    }

    #[test]
    fn objective_averages_target_columns() {
        let (xt, yt, xv, yv) = toy_split();
        let params = HyperParams { n_trees: 15, ..Default::default() };
        let space = SearchSpace::Grid(vec![params.clone()]);
        let (_, both) = tune(&xt, &yt, &xv, &yv, &space, 3).unwrap();
        let (_, only_a) =
            tune(&xt, &yt[..1], &xv, &yv[..1], &space, 3).unwrap();
        let (_, only_b) =
            tune(&xt, &yt[1..], &xv, &yv[1..], &space, 3).unwrap();
        let expect = 0.5 * (only_a[0].val_mse + only_b[0].val_mse);
        assert!((both[0].val_mse - expect).abs() < 1e-12);
    }

    #[test]
    fn same_seed_reproduces_trials() {
        let (xt, yt, xv, yv) = toy_split();
        let space = SearchSpace::Random(RandomSpace {
            budget: 3,
            n_trees: (5, 25),
            ..Default::default()
        });
        let a = tune(&xt, &yt, &xv, &yv, &space, 4).unwrap();
        let b = tune(&xt, &yt, &xv, &yv, &space, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_spaces_are_rejected() {
        let (xt, yt, xv, yv) = toy_split();
        let grid = SearchSpace::Grid(Vec::new());
        assert!(matches!(
            tune(&xt, &yt, &xv, &yv, &grid, 0).unwrap_err(),
            GbdtError::EmptySpace
        ));
        let random =
            SearchSpace::Random(RandomSpace { budget: 0, ..Default::default() });
        assert!(matches!(
            tune(&xt, &yt, &xv, &yv, &random, 0).unwrap_err(),
            GbdtError::EmptySpace
        ));
    }
}
