use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GbdtError, HyperParams, PresortedMatrix};

/// Minimum split gain; anything at or below this becomes a leaf, which also
/// absorbs the exact zero-gain case of constant targets.
pub const MIN_GAIN: f64 = 1e-12;

const NOT_IN: u32 = u32::MAX;

/// Regression tree node. `cover` counts the training rows that reached the
/// node while this tree was fitted; path-dependent attribution needs it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize, cover: usize },
    Leaf { value: f64, cover: usize },
}

/// Binary regression tree in arena form; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Evaluate the tree on one row, reading feature values through `get`.
    pub fn predict_row(&self, get: &impl Fn(usize) -> f64) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    idx = if get(*feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

struct LevelSlot {
    arena: usize,
    sum: f64,
    cnt: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Fit one regression tree to `residuals` by exact greedy splitting.
///
/// Splits maximize sum-of-gradients gain with L2 shrinkage,
///   gain = SL^2/(nL+l2) + SR^2/(nR+l2) - SP^2/(nP+l2),
/// evaluated at midpoints between consecutive distinct values; leaf values
/// are S/(n+l2). Ties break toward the lowest feature index, then the
/// lowest threshold. The RNG drives row subsampling then feature sampling,
/// in that order, so identical seeds give identical trees.
pub fn fit_tree(
    train: &PresortedMatrix,
    residuals: &[f64],
    params: &HyperParams,
    rng: &mut ChaCha8Rng,
) -> Result<Tree, GbdtError> {
    params.validate()?;
    let n = train.n_rows();
    if n == 0 {
        return Err(GbdtError::DegenerateData("cannot fit a tree to zero rows".into()));
    }
    if residuals.len() != n {
        return Err(GbdtError::DegenerateData(format!(
            "{} residuals for {} rows",
            residuals.len(),
            n
        )));
    }
    let x = train.table();
    let n_features = x.n_cols();
    let lambda = params.l2_leaf_reg;

    // Subsample rows, then features; both draws hit the RNG even when the
    // fraction is 1.0 so trial behavior is stable under parameter sweeps.
    let in_tree: Vec<u32> = sample_indices(rng, n, params.row_subsample);
    let features: Vec<usize> = sample_indices(rng, n_features, params.feature_fraction)
        .into_iter()
        .map(|f| f as usize)
        .collect();

    let mut node_of_row = vec![NOT_IN; n];
    let mut root_sum = 0.0;
    for &r in &in_tree {
        node_of_row[r as usize] = 0;
        root_sum += residuals[r as usize];
    }

    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0, cover: 0 }];
    let mut level = vec![LevelSlot { arena: 0, sum: root_sum, cnt: in_tree.len() }];

    for depth in 0..=params.max_depth {
        let n_slots = level.len();
        if n_slots == 0 {
            break;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; n_slots];
        if depth < params.max_depth {
            let mut left_sum = vec![0.0f64; n_slots];
            let mut left_cnt = vec![0usize; n_slots];
            let mut prev_val = vec![0.0f64; n_slots];
            for &f in &features {
                left_sum.fill(0.0);
                left_cnt.fill(0);
                let col = x.col(f);
                for &r in train.order(f) {
                    let s = node_of_row[r as usize];
                    if s == NOT_IN {
                        continue;
                    }
                    let s = s as usize;
                    let v = col[r as usize];
                    let n_left = left_cnt[s];
                    if n_left > 0 && v > prev_val[s] {
                        let slot = &level[s];
                        let n_right = slot.cnt - n_left;
                        if n_left >= params.min_samples_leaf
                            && n_right >= params.min_samples_leaf
                        {
                            let s_left = left_sum[s];
                            let s_right = slot.sum - s_left;
                            let gain = s_left * s_left / (n_left as f64 + lambda)
                                + s_right * s_right / (n_right as f64 + lambda)
                                - slot.sum * slot.sum / (slot.cnt as f64 + lambda);
                            if best[s].is_none_or(|b| gain > b.gain) {
                                best[s] = Some(Candidate {
                                    gain,
                                    feature: f,
                                    threshold: 0.5 * (prev_val[s] + v),
                                });
                            }
                        }
                    }
                    left_sum[s] += residuals[r as usize];
                    left_cnt[s] += 1;
                    prev_val[s] = v;
                }
            }
        }

        // Materialize this level: losers become leaves, winners split and
        // seed the next level's slots.
        let mut next = Vec::new();
        let mut child_of = vec![(0usize, 0usize); n_slots];
        let mut splits = vec![None; n_slots];
        for (s, slot) in level.iter().enumerate() {
            match best[s] {
                Some(c) if c.gain > MIN_GAIN => {
                    let left = nodes.len();
                    let right = nodes.len() + 1;
                    nodes.push(Node::Leaf { value: 0.0, cover: 0 });
                    nodes.push(Node::Leaf { value: 0.0, cover: 0 });
                    nodes[slot.arena] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                        cover: slot.cnt,
                    };
                    let ls = next.len();
                    next.push(LevelSlot { arena: left, sum: 0.0, cnt: 0 });
                    next.push(LevelSlot { arena: right, sum: 0.0, cnt: 0 });
                    child_of[s] = (ls, ls + 1);
                    splits[s] = Some(c);
                }
                _ => {
                    nodes[slot.arena] = Node::Leaf {
                        value: slot.sum / (slot.cnt as f64 + lambda),
                        cover: slot.cnt,
                    };
                }
            }
        }
        if next.is_empty() {
            break;
        }
        for r in 0..n {
            let s = node_of_row[r];
            if s == NOT_IN {
                continue;
            }
            let s = s as usize;
            match splits[s] {
                Some(c) => {
                    let (l, rgt) = child_of[s];
                    let child =
                        if x.value(r, c.feature) <= c.threshold { l } else { rgt };
                    node_of_row[r] = child as u32;
                    next[child].sum += residuals[r];
                    next[child].cnt += 1;
                }
                None => node_of_row[r] = NOT_IN,
            }
        }
        level = next;
    }
    Ok(Tree { nodes })
}

/// Sample `ceil(fraction * n)`-ish indices without replacement; the full set
/// (in natural order) when fraction is 1.
fn sample_indices(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> Vec<u32> {
    let m = ((n as f64 * fraction).round() as usize).clamp(1, n);
    if m == n {
        return (0..n as u32).collect();
    }
    let mut picked = rand::seq::index::sample(rng, n, m).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| i as u32).collect()
}
