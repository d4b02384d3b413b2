use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::EvalError;

/// Studentized-range constants q_alpha / sqrt(2) for the Nemenyi critical
/// difference, k = 2..=10 models (Demsar's two-tailed tables).
const Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_10: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

/// Friedman test outcome with the Nemenyi post-hoc threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    /// Mean rank per model (1 = best), task-averaged.
    pub mean_ranks: Vec<f64>,
    pub chi2: f64,
    pub p_value: f64,
    /// Two mean ranks differing by more than this are significantly
    /// different at the requested alpha.
    pub critical_difference: f64,
    pub n_tasks: usize,
    pub n_models: usize,
}

/// Friedman rank test over a tasks-by-models score matrix (lower scores
/// rank better), with the Nemenyi critical difference at `alpha`.
///
/// Ranks within a task average on ties. The statistic is
/// chi2_F = 12N/(k(k+1)) * [sum_j Rbar_j^2 - k(k+1)^2/4], referred to a
/// chi-squared distribution with k-1 degrees of freedom, and
/// CD = q_alpha * sqrt(k(k+1)/(6N)).
pub fn friedman_nemenyi(scores: &[Vec<f64>], alpha: f64) -> Result<FriedmanResult, EvalError> {
    let n = scores.len();
    if n < 2 {
        return Err(EvalError::TooFewTasks(n));
    }
    let k = scores[0].len();
    if k < 2 {
        return Err(EvalError::TooFewModels(k));
    }
    if k > 10 {
        return Err(EvalError::TooManyModels(k));
    }
    if let Some(bad) = scores.iter().find(|row| row.len() != k) {
        return Err(EvalError::Misaligned(format!(
            "ragged score matrix: row with {} models, expected {k}",
            bad.len()
        )));
    }
    let q_table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_10
    } else {
        return Err(EvalError::UnsupportedAlpha(alpha));
    };

    let mut rank_sums = vec![0.0f64; k];
    for row in scores {
        for (j, r) in tied_ranks(row).into_iter().enumerate() {
            rank_sums[j] += r;
        }
    }
    let mean_ranks: Vec<f64> = rank_sums.iter().map(|s| s / n as f64).collect();

    let kf = k as f64;
    let nf = n as f64;
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let chi2 = (12.0 * nf / (kf * (kf + 1.0))) * (sum_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    let chi2 = chi2.max(0.0);
    let p_value = if chi2 == 0.0 {
        1.0
    } else {
        1.0 - ChiSquared::new(kf - 1.0).expect("df >= 1").cdf(chi2)
    };
    let critical_difference = q_table[k - 2] * (kf * (kf + 1.0) / (6.0 * nf)).sqrt();

    Ok(FriedmanResult { mean_ranks, chi2, p_value, critical_difference, n_tasks: n, n_models: k })
}

/// Ascending ranks with ties sharing their average position.
fn tied_ranks(row: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && row[idx[j + 1]] == row[idx[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average 1-based rank.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &item in &idx[i..=j] {
            ranks[item] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tied_ranks_average_positions() {
        assert_eq!(tied_ranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(tied_ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(tied_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn identical_models_give_zero_statistic() {
        let scores = vec![vec![1.0, 1.0, 1.0]; 5];
        let r = friedman_nemenyi(&scores, 0.05).unwrap();
        assert_eq!(r.chi2, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(r.mean_ranks.iter().all(|&m| (m - 2.0).abs() < 1e-12));
    }

    #[test]
    fn perfect_ordering_hand_case() {
        // Three models, four tasks, always ranked A < B < C.
        let scores: Vec<Vec<f64>> =
            (0..4).map(|t| vec![10.0 + t as f64, 20.0 + t as f64, 30.0 + t as f64]).collect();
        let r = friedman_nemenyi(&scores, 0.05).unwrap();
        assert_eq!(r.mean_ranks, vec![1.0, 2.0, 3.0]);
        assert!((r.chi2 - 8.0).abs() < 1e-12, "chi2 {}", r.chi2);
        assert!((r.p_value - 0.0183).abs() < 5e-4, "p {}", r.p_value);
    }

    #[test]
    fn critical_difference_published_value() {
        let scores: Vec<Vec<f64>> = (0..180)
            .map(|t| (0..8).map(|m| (m as f64) + ((t * m) % 7) as f64 * 0.01).collect())
            .collect();
        let r = friedman_nemenyi(&scores, 0.05).unwrap();
        assert!(
            (r.critical_difference - 0.783).abs() < 1e-3,
            "cd {}",
            r.critical_difference
        );
    }

    #[test]
    fn ranks_invariant_under_monotone_transform() {
        let scores = vec![
            vec![0.3, 0.1, 0.7],
            vec![0.2, 0.5, 0.9],
            vec![0.8, 0.4, 0.6],
        ];
        let warped: Vec<Vec<f64>> = scores
            .iter()
            .map(|row| row.iter().map(|v: &f64| v.exp() * 100.0 + 3.0).collect())
            .collect();
        let a = friedman_nemenyi(&scores, 0.10).unwrap();
        let b = friedman_nemenyi(&warped, 0.10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_and_alpha_guards() {
        let ok = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(
            friedman_nemenyi(&ok[..1], 0.05),
            Err(EvalError::TooFewTasks(1))
        ));
        assert!(matches!(
            friedman_nemenyi(&[vec![1.0], vec![2.0]], 0.05),
            Err(EvalError::TooFewModels(1))
        ));
        assert!(matches!(
            friedman_nemenyi(&ok, 0.2),
            Err(EvalError::UnsupportedAlpha(_))
        ));
        let wide = vec![vec![0.0; 11], vec![1.0; 11]];
        assert!(matches!(
            friedman_nemenyi(&wide, 0.05),
            Err(EvalError::TooManyModels(11))
        ));
    }
}
