//! Small shared statistical helpers: normal distribution shortcuts, ordinary
//! least squares on small design matrices, and deterministic task seeding.

use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile function.
pub fn norm_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Population (1/N) mean and standard deviation of a slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Ordinary least squares `y ~ X b` for small, dense design matrices.
///
/// Solves the normal equations by Gaussian elimination with partial pivoting.
/// Near-zero pivots (rank deficiency, e.g. perfectly collinear regressors)
/// zero out the corresponding coefficient, which leaves fitted values on the
/// column-space projection and keeps the residual sum of squares well defined.
///
/// Returns `(coefficients, residual sum of squares)`.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let n = y.len();
    let k = x.len();
    debug_assert!(x.iter().all(|c| c.len() == n));

    // Normal equations X'X b = X'y.
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in i..k {
            let s: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
            a[i][j] = s;
        }
        for j in 0..i {
            a[i][j] = a[j][i];
        }
        a[i][k] = x[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }

    let scale = (0..k)
        .map(|i| a[i][i].abs())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = scale * 1e-12;

    // Gauss-Jordan with partial pivoting. Columns without a usable pivot are
    // free (rank deficiency); their coefficient stays 0, a basic solution.
    let mut pivot_row_of = vec![usize::MAX; k];
    let mut next_row = 0usize;
    for col in 0..k {
        let (pivot_row, pivot_abs) = (next_row..k)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|l, r| l.1.total_cmp(&r.1))
            .unwrap_or((next_row, 0.0));
        if pivot_abs <= tol {
            continue;
        }
        a.swap(next_row, pivot_row);
        for r in 0..k {
            if r != next_row && a[r][col] != 0.0 {
                let f = a[r][col] / a[next_row][col];
                for c in col..=k {
                    a[r][c] -= f * a[next_row][c];
                }
                a[r][col] = 0.0;
            }
        }
        pivot_row_of[col] = next_row;
        next_row += 1;
    }

    let mut beta = vec![0.0; k];
    for col in 0..k {
        let row = pivot_row_of[col];
        if row != usize::MAX {
            beta[col] = a[row][k] / a[row][col];
        }
    }

    let mut rss = 0.0;
    for i in 0..n {
        let fit: f64 = (0..k).map(|j| beta[j] * x[j][i]).sum();
        let e = y[i] - fit;
        rss += e * e;
    }
    (beta, rss)
}

/// OLS with inference: coefficients, residual sum of squares, and the
/// diagonal of (X'X)^-1 for coefficient standard errors.
///
/// Returns `None` when X'X is numerically singular; unlike [`ols`] there is
/// no meaningful basic-solution fallback once standard errors are wanted.
pub fn ols_inference(x: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let n = y.len();
    let k = x.len();
    debug_assert!(x.iter().all(|c| c.len() == n));

    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for i in 0..k {
        for j in i..k {
            let s: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
            xtx[i][j] = s;
            xtx[j][i] = s;
        }
        xty[i] = x[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }

    let inv = invert(&xtx)?;
    let beta: Vec<f64> =
        (0..k).map(|i| (0..k).map(|j| inv[i][j] * xty[j]).sum()).collect();
    let mut rss = 0.0;
    for i in 0..n {
        let fit: f64 = (0..k).map(|j| beta[j] * x[j][i]).sum();
        let e = y[i] - fit;
        rss += e * e;
    }
    let diag = (0..k).map(|i| inv[i][i]).collect();
    Some((beta, rss, diag))
}

/// Gauss-Jordan inversion with partial pivoting; `None` on singularity.
fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let k = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut ext = row.clone();
            ext.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            ext
        })
        .collect();
    let scale = (0..k).map(|i| m[i][i].abs()).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let tol = scale * 1e-13;

    for col in 0..k {
        let (pivot, pivot_abs) = (col..k)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|l, r| l.1.total_cmp(&r.1))?;
        if pivot_abs <= tol {
            return None;
        }
        a.swap(col, pivot);
        let d = a[col][col];
        for c in 0..2 * k {
            a[col][c] /= d;
        }
        for r in 0..k {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col];
                for c in 0..2 * k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[k..].to_vec()).collect())
}

/// Derive a per-task seed from the global seed and a task label.
///
/// Stable across runs, platforms, and worker counts, so parallel schedules
/// reproduce serial results.
pub fn task_seed(global_seed: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    for part in parts {
        hasher.update([0xff]);
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields >= 8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_exact_linear_model() {
        let x = vec![vec![1.0; 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]];
        let y: Vec<f64> = (1..=5).map(|i| 3.0 + 2.0 * i as f64).collect();
        let (beta, rss) = ols(&x, &y);
        assert!((beta[0] - 3.0).abs() < 1e-10);
        assert!((beta[1] - 2.0).abs() < 1e-10);
        assert!(rss < 1e-18);
    }

    #[test]
    fn ols_handles_collinear_columns() {
        let c = vec![1.0, 2.0, 3.0, 4.0];
        let x = vec![c.clone(), c.clone()];
        let y = vec![2.0, 4.0, 6.0, 8.0];
        let (beta, rss) = ols(&x, &y);
        // Fitted values must still land on the projection.
        assert!(rss < 1e-18, "rss = {rss}");
        let fit0 = beta[0] * 1.0 + beta[1] * 1.0;
        assert!((fit0 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn task_seed_is_stable_and_label_sensitive() {
        let a = task_seed(7, &["region", "h1"]);
        let b = task_seed(7, &["region", "h1"]);
        let c = task_seed(7, &["region", "h2"]);
        let d = task_seed(8, &["region", "h1"]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        // Concatenation must not collide with re-chunked labels.
        assert_ne!(task_seed(7, &["ab", "c"]), task_seed(7, &["a", "bc"]));
    }

    #[test]
    fn norm_helpers_match_known_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-12);
        assert!((norm_cdf(1.6449) - 0.95).abs() < 1e-4);
        assert!((norm_quantile(0.975) - 1.959964).abs() < 1e-5);
        assert!((norm_pdf(0.0) - 0.3989422804014327).abs() < 1e-15);
    }

    #[test]
    fn ols_inference_matches_plain_ols_and_hand_variance() {
        let x = vec![vec![1.0; 6], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]];
        let y = vec![1.1, 2.9, 5.2, 6.8, 9.1, 10.9];
        let (beta_plain, rss_plain) = ols(&x, &y);
        let (beta, rss, diag) = ols_inference(&x, &y).unwrap();
        for j in 0..2 {
            assert!((beta[j] - beta_plain[j]).abs() < 1e-10);
        }
        assert!((rss - rss_plain).abs() < 1e-10);
        // For simple regression, (X'X)^-1 slope diagonal = 1/Sxx.
        let xm = mean(&x[1]);
        let sxx: f64 = x[1].iter().map(|v| (v - xm) * (v - xm)).sum();
        assert!((diag[1] - 1.0 / sxx).abs() < 1e-12);
    }

    #[test]
    fn ols_inference_rejects_singular_designs() {
        let c = vec![1.0, 2.0, 3.0, 4.0];
        assert!(ols_inference(&[c.clone(), c.clone()], &[1.0, 2.0, 3.0, 4.0]).is_none());
    }
}
