use rayon::prelude::*;

use crate::data::Table;
use crate::gbdt::{Ensemble, Node, Tree};

use super::{AttributionError, ShapMatrix};

/// Dummy feature index for the root entry of a decision path; never
/// collides with a real feature, so FINDFIRST scans can cover the whole
/// path.
const NO_FEATURE: usize = usize::MAX;

#[derive(Clone, Copy)]
struct PathElement {
    feature: usize,
    /// Fraction of training cover that keeps flowing through this split
    /// when its feature is outside the coalition.
    zero: f64,
    /// 1.0 when the explained row satisfies the split, else 0.0.
    one: f64,
    /// Permutation weight accumulated along the path.
    w: f64,
}

/// Path-dependent SHAP attributions of one feature row under `e`, in model
/// units: `(phi, base)` with `base + phi.sum() == e.predict_row_raw(row)`.
///
/// Per tree, `phi_j` is the exact Shapley value of the game whose coalition
/// value is the tree's cover-weighted conditional expectation (descend on
/// coalition features, average children by cover otherwise); the base value
/// is the no-coalition expectation. Tree attributions are shrunk by the
/// learning rate and summed, mirroring prediction.
pub fn tree_shap(e: &Ensemble, row: &[f64]) -> Result<(Vec<f64>, f64), AttributionError> {
    check_row(e, row)?;
    check_covers(e)?;
    Ok(shap_row(e, row))
}

/// [`tree_shap`] over every row of `x`, validated once; rows are
/// independent and computed in parallel.
pub fn shap_matrix(e: &Ensemble, x: &Table) -> Result<ShapMatrix, AttributionError> {
    e.check_columns(x)?;
    check_covers(e)?;
    let rows: Vec<Vec<f64>> = (0..x.n_rows())
        .into_par_iter()
        .map(|r| {
            let row: Vec<f64> = (0..x.n_cols()).map(|f| x.value(r, f)).collect();
            shap_row(e, &row).0
        })
        .collect();
    let base = base_value(e);
    Ok(ShapMatrix::new(e.feature_names().to_vec(), base, rows))
}

fn check_row(e: &Ensemble, row: &[f64]) -> Result<(), AttributionError> {
    if row.len() != e.feature_names().len() {
        return Err(AttributionError::Misaligned(format!(
            "row has {} values, model expects {}",
            row.len(),
            e.feature_names().len()
        )));
    }
    Ok(())
}

fn check_covers(e: &Ensemble) -> Result<(), AttributionError> {
    for tree in e.trees() {
        for node in tree.nodes() {
            let cover = match node {
                Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
            };
            if cover == 0 {
                return Err(AttributionError::MissingCovers);
            }
        }
    }
    Ok(())
}

fn shap_row(e: &Ensemble, row: &[f64]) -> (Vec<f64>, f64) {
    let mut phi = vec![0.0; row.len()];
    for tree in e.trees() {
        tree_phi(tree, row, e.learning_rate(), &mut phi);
    }
    (phi, base_value(e))
}

/// No-coalition expectation of the whole ensemble: base score plus each
/// tree's cover-weighted mean leaf value, shrunk by the learning rate.
fn base_value(e: &Ensemble) -> f64 {
    let mut base = e.base_score();
    for tree in e.trees() {
        let nodes = tree.nodes();
        let root_cover = match nodes[0] {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        };
        let weighted: f64 = nodes
            .iter()
            .map(|n| match n {
                Node::Leaf { value, cover } => value * *cover as f64,
                Node::Split { .. } => 0.0,
            })
            .sum();
        base += e.learning_rate() * weighted / root_cover as f64;
    }
    base
}

fn tree_phi(tree: &Tree, row: &[f64], learning_rate: f64, phi: &mut [f64]) {
    recurse(tree.nodes(), 0, row, &[], 1.0, 1.0, NO_FEATURE, learning_rate, phi);
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    nodes: &[Node],
    node: usize,
    row: &[f64],
    parent_path: &[PathElement],
    parent_zero: f64,
    parent_one: f64,
    parent_feature: usize,
    learning_rate: f64,
    phi: &mut [f64],
) {
    let mut path = parent_path.to_vec();
    extend(&mut path, parent_zero, parent_one, parent_feature);

    match &nodes[node] {
        Node::Leaf { value, .. } => {
            // Entry 0 is the root dummy; every later entry is one distinct
            // feature on the path, credited with its permutation weight.
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                phi[path[i].feature] += learning_rate * w * (path[i].one - path[i].zero) * value;
            }
        }
        Node::Split { feature, threshold, left, right, cover } => {
            let (hot, cold) = if row[*feature] <= *threshold {
                (*left, *right)
            } else {
                (*right, *left)
            };
            let cover_of = |idx: usize| match nodes[idx] {
                Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover as f64,
            };
            let hot_frac = cover_of(hot) / *cover as f64;
            let cold_frac = cover_of(cold) / *cover as f64;

            // A feature met again on the path is unwound first so each path
            // entry stays unique; its fractions carry into the children.
            let (mut in_zero, mut in_one) = (1.0, 1.0);
            if let Some(k) = path.iter().position(|p| p.feature == *feature) {
                in_zero = path[k].zero;
                in_one = path[k].one;
                unwind(&mut path, k);
            }
            recurse(nodes, hot, row, &path, hot_frac * in_zero, in_one, *feature, learning_rate, phi);
            recurse(nodes, cold, row, &path, cold_frac * in_zero, 0.0, *feature, learning_rate, phi);
        }
    }
}

/// Append a path element and redistribute permutation weights over the now
/// longer path (weights cover every ordering of the unique features).
fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: usize) {
    let old = path.len();
    path.push(PathElement { feature, zero, one, w: if old == 0 { 1.0 } else { 0.0 } });
    let len = (old + 1) as f64;
    for i in (0..old).rev() {
        path[i + 1].w += one * path[i].w * (i + 1) as f64 / len;
        path[i].w = zero * path[i].w * (old - i) as f64 / len;
    }
}

/// Exact inverse of [`extend`] for the element at `k`.
fn unwind(path: &mut Vec<PathElement>, k: usize) {
    let last = path.len() - 1;
    let len = path.len() as f64;
    let one = path[k].one;
    let zero = path[k].zero;
    let mut carry = path[last].w;
    for i in (0..last).rev() {
        if one != 0.0 {
            let kept = path[i].w;
            path[i].w = carry * len / ((i + 1) as f64 * one);
            carry = kept - path[i].w * zero * (last - i) as f64 / len;
        } else {
            path[i].w = path[i].w * len / (zero * (last - i) as f64);
        }
    }
    for i in k..last {
        let next = path[i + 1];
        path[i].feature = next.feature;
        path[i].zero = next.zero;
        path[i].one = next.one;
    }
    path.truncate(last);
}

/// Total weight the path would have after unwinding `k`, without mutating.
fn unwound_sum(path: &[PathElement], k: usize) -> f64 {
    let last = path.len() - 1;
    let one = path[k].one;
    let zero = path[k].zero;
    let mut total = 0.0;
    if one != 0.0 {
        let mut carry = path[last].w;
        for i in (0..last).rev() {
            let share = carry / ((i + 1) as f64 * one);
            total += share;
            carry = path[i].w - share * zero * (last - i) as f64;
        }
    } else {
        for i in (0..last).rev() {
            total += path[i].w / (zero * (last - i) as f64);
        }
    }
    total * path.len() as f64
}
