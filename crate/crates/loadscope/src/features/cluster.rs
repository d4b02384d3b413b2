use crate::data::{DailyFeatureSeries, Table};

use super::FeatureError;

/// One agglomeration step. Cluster ids follow the usual dendrogram scheme:
/// items are 0..n, the merge at step t creates cluster n + t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Increase in total within-cluster variance caused by this merge.
    pub height: f64,
}

/// Full agglomerative merge history under Ward linkage.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    n_items: usize,
    merges: Vec<Merge>,
}

impl ClusterResult {
    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    /// Labels after cutting the dendrogram at `k` clusters. Labels are
    /// canonical: cluster j is the j-th by smallest member index, so the
    /// output does not depend on merge bookkeeping.
    pub fn assignment(&self, k: usize) -> Result<Vec<usize>, FeatureError> {
        let n = self.n_items;
        if k == 0 || k > n {
            return Err(FeatureError::BadK { k, items: n });
        }
        // Union-find over the first n - k merges.
        let mut parent: Vec<usize> = (0..n + self.merges.len()).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (t, m) in self.merges.iter().take(n - k).enumerate() {
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            parent[ra] = n + t;
            parent[rb] = n + t;
        }
        let mut label_of_root = std::collections::HashMap::new();
        let mut labels = vec![0usize; n];
        for i in 0..n {
            let root = find(&mut parent, i);
            let next = label_of_root.len();
            labels[i] = *label_of_root.entry(root).or_insert(next);
        }
        Ok(labels)
    }

    /// Medoid column index per cluster: the member minimizing summed squared
    /// Euclidean distance to its cluster, ties to the first column.
    /// `table` must be the matrix the clustering ran on.
    pub fn medoids(&self, k: usize, table: &Table) -> Result<Vec<usize>, FeatureError> {
        let labels = self.assignment(k)?;
        let mut medoids = Vec::with_capacity(k);
        for cluster in 0..k {
            let members: Vec<usize> =
                (0..labels.len()).filter(|&i| labels[i] == cluster).collect();
            let best = members
                .iter()
                .map(|&i| {
                    let cost: f64 = members
                        .iter()
                        .map(|&j| sq_dist(table.col(i), table.col(j)))
                        .sum();
                    (i, cost)
                })
                .min_by(|l, r| l.1.total_cmp(&r.1).then(l.0.cmp(&r.0)))
                .expect("every cluster has at least one member")
                .0;
            medoids.push(best);
        }
        Ok(medoids)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Agglomerate the table's columns (one point per feature, coordinates =
/// days) under Ward linkage.
///
/// Dissimilarities are variance increases: two singletons start at half
/// their squared Euclidean distance, and the Lance-Williams update
///   W(A∪B, C) = [(nA+nC) W(A,C) + (nB+nC) W(B,C) − nC W(A,B)] / (nA+nB+nC)
/// keeps every value equal to the exact merge cost.
pub fn cluster_textual_features(table: &Table) -> Result<ClusterResult, FeatureError> {
    let n = table.n_cols();
    if n < 3 {
        return Err(FeatureError::TooFewFeatures(n));
    }
    // Flat upper-triangle-free full matrix keeps indexing simple; n is the
    // number of textual features (hundreds), so n^2 memory is nothing.
    let mut w = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(table.col(i), table.col(j)) / 2.0;
            w[i * n + j] = d;
            w[j * n + i] = d;
        }
    }
    // slot -> (cluster id, size); merged slots vacate.
    let mut active: Vec<Option<(usize, usize)>> = (0..n).map(|i| Some((i, 1))).collect();
    let mut merges = Vec::with_capacity(n - 1);
    let mut last_height = f64::NEG_INFINITY;
    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if active[i].is_none() {
                continue;
            }
            for j in (i + 1)..n {
                if active[j].is_none() {
                    continue;
                }
                let d = w[i * n + j];
                let better = match best {
                    None => true,
                    // Strict < plus slot order makes ties lexicographic.
                    Some((bd, _, _)) => d < bd,
                };
                if better {
                    best = Some((d, i, j));
                }
            }
        }
        let (raw_height, si, sj) = best.expect("at least two active clusters remain");
        let (id_i, n_i) = active[si].expect("selected slot is active");
        let (id_j, n_j) = active[sj].expect("selected slot is active");
        // Ward is reducible, so heights are mathematically nondecreasing;
        // the clamp only absorbs last-ulp float noise in the updates. The
        // Lance-Williams step below still uses the raw value.
        let height = raw_height.max(last_height.max(0.0));
        last_height = height;
        merges.push(Merge { a: id_i.min(id_j), b: id_i.max(id_j), height });

        let (na, nb) = (n_i as f64, n_j as f64);
        for c in 0..n {
            if c == si || c == sj || active[c].is_none() {
                continue;
            }
            let nc = active[c].expect("checked").1 as f64;
            let updated = ((na + nc) * w[si * n + c] + (nb + nc) * w[sj * n + c]
                - nc * raw_height)
                / (na + nb + nc);
            w[si * n + c] = updated;
            w[c * n + si] = updated;
        }
        active[si] = Some((n + step, n_i + n_j));
        active[sj] = None;
    }
    Ok(ClusterResult { n_items: n, merges })
}

/// Elbow of the total within-cluster variance profile.
///
/// With heights h_1..h_{n-1}, the variance at k clusters is the sum of the
/// first n−k heights, so the discrete curvature at k reduces to
/// h_{n−k+1} − h_{n−k}; the k maximizing it (smallest k on ties) sits just
/// before the profile's sharpest jump.
pub fn select_k_elbow(heights: &[f64]) -> Result<usize, FeatureError> {
    if heights.len() < 4 {
        return Err(FeatureError::TooFewMerges(heights.len()));
    }
    let n = heights.len() + 1;
    let mut best_k = 2;
    let mut best_curv = f64::NEG_INFINITY;
    for k in 2..=(n - 1) {
        let curv = heights[n - k] - heights[n - k - 1];
        if curv > best_curv {
            best_curv = curv;
            best_k = k;
        }
    }
    Ok(best_k)
}

/// The k medoid series, renamed to carry their cluster id.
///
/// `series` must be the same columns, in the same order, that produced
/// `result` (and `table` their matrix form). Returned names look like
/// `c03_heatwave_coverage`: cluster id prefix, then the original feature
/// name, recoverable via [`centroid_source_name`].
pub fn extract_centroids(
    result: &ClusterResult,
    k: usize,
    table: &Table,
    series: &[DailyFeatureSeries],
) -> Result<Vec<DailyFeatureSeries>, FeatureError> {
    if series.len() != result.n_items() || table.n_cols() != result.n_items() {
        return Err(FeatureError::BadK { k, items: result.n_items() });
    }
    let medoids = result.medoids(k, table)?;
    Ok(medoids
        .iter()
        .enumerate()
        .map(|(cid, &col)| {
            let s = &series[col];
            s.clone().with_name(format!("c{cid:02}_{}", s.name()))
        })
        .collect())
}

/// Original feature name behind a centroid name from [`extract_centroids`].
pub fn centroid_source_name(centroid: &str) -> &str {
    match centroid.split_once('_') {
        Some((prefix, rest)) if prefix.len() == 3 && prefix.starts_with('c') => rest,
        _ => centroid,
    }
}
