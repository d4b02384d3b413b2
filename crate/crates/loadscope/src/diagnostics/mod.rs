//! Calibration diagnostics for Gaussian forecasts and paired significance
//! tests for feature-impact comparisons.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::stats::{mean, norm_cdf, norm_quantile};

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("sigma must be positive, got {sigma} at index {index}")]
    NonPositiveSigma { index: usize, sigma: f64 },
}

/// Nominal probability grid for reliability curves: 0.05 to 0.95 by 0.05.
pub fn reliability_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// Calibration summary of a set of Gaussian forecasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Phi((y - mu)/sigma) per observation, in input order.
    pub pit: Vec<f64>,
    /// (nominal p, empirical P(PIT <= p)) on the standard grid.
    pub reliability: Vec<(f64, f64)>,
    /// (theoretical normal quantile, sorted standardized residual).
    pub qq: Vec<(f64, f64)>,
    /// max |empirical - nominal| over the reliability grid.
    pub max_reliability_deviation: f64,
    /// Kolmogorov-Smirnov distance of the PIT sample from uniform.
    pub ks_stat: f64,
}

/// PIT-based calibration report for aligned (mu, sigma, truth) slices.
///
/// A perfectly calibrated forecaster has uniform PIT values, a reliability
/// curve on the diagonal, and standardized residuals matching standard
/// normal quantiles.
pub fn pit_and_reliability(
    mu: &[f64],
    sigma: &[f64],
    truth: &[f64],
) -> Result<CalibrationReport, DiagError> {
    let n = truth.len();
    if n == 0 || mu.len() != n || sigma.len() != n {
        return Err(DiagError::Misaligned(format!(
            "{} mu, {} sigma, {} truth",
            mu.len(),
            sigma.len(),
            n
        )));
    }
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        if !(sigma[i] > 0.0) {
            return Err(DiagError::NonPositiveSigma { index: i, sigma: sigma[i] });
        }
        z.push((truth[i] - mu[i]) / sigma[i]);
    }
    let pit: Vec<f64> = z.iter().map(|&zi| norm_cdf(zi)).collect();

    let mut sorted_pit = pit.clone();
    sorted_pit.sort_by(f64::total_cmp);
    let reliability: Vec<(f64, f64)> = reliability_grid()
        .into_iter()
        .map(|p| {
            let count = sorted_pit.partition_point(|&v| v <= p);
            (p, count as f64 / n as f64)
        })
        .collect();
    let max_reliability_deviation = reliability
        .iter()
        .map(|(p, e)| (e - p).abs())
        .fold(0.0, f64::max);

    // KS distance of the PIT empirical CDF from Uniform(0,1), checking the
    // step function on both sides of each jump.
    let mut ks_stat = 0.0f64;
    for (i, &p) in sorted_pit.iter().enumerate() {
        let hi = (i + 1) as f64 / n as f64 - p;
        let lo = p - i as f64 / n as f64;
        ks_stat = ks_stat.max(hi.abs()).max(lo.abs());
    }

    let qq = qq_points(&z)?;
    Ok(CalibrationReport { pit, reliability, qq, max_reliability_deviation, ks_stat })
}

/// Q-Q pairs for standardized residuals: theoretical standard-normal
/// quantile at plotting position (i - 0.5)/n against the i-th order
/// statistic of `z`.
pub fn qq_points(z: &[f64]) -> Result<Vec<(f64, f64)>, DiagError> {
    let n = z.len();
    if n < 10 {
        return Err(DiagError::TooFew { needed: 10, got: n });
    }
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, zi)| (norm_quantile((i as f64 + 0.5) / n as f64), zi))
        .collect())
}

/// Paired t-test outcome on aligned sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub mean_diff: f64,
    pub t: f64,
    pub p_value: f64,
    pub n: usize,
}

impl TTestResult {
    pub fn significant_at_01(&self) -> bool {
        self.p_value < 0.01
    }
}

/// Classic paired t-test on d_i = a_i - b_i with two-sided p from a t
/// distribution with n-1 degrees of freedom.
///
/// Degenerate zero-variance differences are reported, not raised: all-zero
/// differences give p = 1, a constant nonzero difference gives p = 0 with
/// an infinite t.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult, DiagError> {
    let n = a.len();
    if n != b.len() {
        return Err(DiagError::Misaligned(format!("{n} vs {} observations", b.len())));
    }
    if n < 2 {
        return Err(DiagError::TooFew { needed: 2, got: n });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean_diff = mean(&d);
    let var = d.iter().map(|v| (v - mean_diff) * (v - mean_diff)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        let (t, p_value) = if mean_diff == 0.0 {
            (0.0, 1.0)
        } else {
            (mean_diff.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TTestResult { mean_diff, t, p_value, n });
    }
    let t = mean_diff / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 1.0).expect("valid dof");
    let p_value = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTestResult { mean_diff, t, p_value, n })
}

/// Render a value with the conventional significance stars: `**` for
/// p < 0.01, `*` for p < 0.05, nothing otherwise.
pub fn significance_label(value: f64, p: f64) -> String {
    let stars = if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    };
    format!("{value:.2}{stars}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, StudentT};

    fn simulated(n: usize, sigma_scale: f64, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm = Normal::new(0.0, 1.0).unwrap();
        let mut mu = Vec::with_capacity(n);
        let mut sigma = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let m = rng.random_range(-10.0..10.0);
            let s_true = rng.random_range(0.5..3.0);
            mu.push(m);
            sigma.push(s_true * sigma_scale);
            y.push(m + s_true * norm.sample(&mut rng));
        }
        (mu, sigma, y)
    }

    #[test]
    fn truth_at_mu_gives_pit_half() {
        let mu = vec![5.0; 20];
        let sigma = vec![2.0; 20];
        let report = pit_and_reliability(&mu, &sigma, &mu).unwrap();
        assert!(report.pit.iter().all(|&p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn calibrated_forecasts_stay_near_the_diagonal() {
        let (mu, sigma, y) = simulated(5000, 1.0, 1);
        let report = pit_and_reliability(&mu, &sigma, &y).unwrap();
        assert!(
            report.max_reliability_deviation < 0.03,
            "deviation {}",
            report.max_reliability_deviation
        );
        // 1.5x slack over the 95% KS band 1.36/sqrt(n).
        assert!(report.ks_stat < 1.5 * 1.36 / (5000f64).sqrt(), "ks {}", report.ks_stat);
        for w in report.reliability.windows(2) {
            assert!(w[1].1 >= w[0].1, "reliability curve decreased");
        }
    }

    #[test]
    fn underdispersion_bows_the_curve() {
        // Predicted sigma half the truth: PIT mass piles at the extremes,
        // pushing the curve above the diagonal at low p, below at high p.
        let (mu, sigma, y) = simulated(5000, 0.5, 2);
        let report = pit_and_reliability(&mu, &sigma, &y).unwrap();
        let at = |p: f64| {
            report
                .reliability
                .iter()
                .find(|(g, _)| (g - p).abs() < 1e-9)
                .map(|(_, e)| *e)
                .unwrap()
        };
        assert!(at(0.05) > 0.10, "low tail {}", at(0.05));
        assert!(at(0.95) < 0.90, "high tail {}", at(0.95));
    }

    #[test]
    fn qq_of_exact_normal_quantiles_is_the_diagonal() {
        let n = 200;
        let z: Vec<f64> = (0..n).map(|i| norm_quantile((i as f64 + 0.5) / n as f64)).collect();
        let pairs = qq_points(&z).unwrap();
        for (theory, sample) in pairs {
            assert!((theory - sample).abs() < 1e-12);
        }
    }

    #[test]
    fn heavy_tails_overshoot_normal_quantiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Raw t3 draws: heavy tails overshoot the normal line well inside
        // the 5% plotting positions.
        let t3 = StudentT::new(3.0).unwrap();
        let z: Vec<f64> = (0..4000).map(|_| t3.sample(&mut rng)).collect();
        let pairs = qq_points(&z).unwrap();
        let tail = pairs.len() / 20;
        let lower_excess: f64 =
            pairs[..tail].iter().map(|(t, s)| t - s).sum::<f64>() / tail as f64;
        let upper_excess: f64 =
            pairs[pairs.len() - tail..].iter().map(|(t, s)| s - t).sum::<f64>() / tail as f64;
        assert!(lower_excess > 0.0, "lower tail {lower_excess}");
        assert!(upper_excess > 0.0, "upper tail {upper_excess}");
    }

    #[test]
    fn constant_residuals_make_a_horizontal_line() {
        let z = vec![0.7; 50];
        let pairs = qq_points(&z).unwrap();
        assert!(pairs.iter().all(|(_, s)| *s == 0.7));
        assert!(matches!(
            qq_points(&z[..5]),
            Err(DiagError::TooFew { needed: 10, got: 5 })
        ));
    }

    #[test]
    fn equal_sequences_are_insignificant() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let r = paired_ttest(&a, &a).unwrap();
        assert_eq!(r.mean_diff, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant_at_01());
    }

    #[test]
    fn large_shift_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let norm = Normal::new(0.0, 0.1).unwrap();
        let a: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 5.0 + norm.sample(&mut rng)).collect();
        let r = paired_ttest(&a, &b).unwrap();
        assert!((r.mean_diff + 5.0).abs() < 0.05);
        assert!(r.p_value < 1e-10);
        assert!(r.significant_at_01());
    }

    #[test]
    fn ttest_is_antisymmetric() {
        let a = vec![1.0, 4.0, 2.0, 8.0, 5.0];
        let b = vec![2.0, 3.0, 2.5, 7.0, 6.0];
        let ab = paired_ttest(&a, &b).unwrap();
        let ba = paired_ttest(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p_value, ba.p_value);
    }

    #[test]
    fn degenerate_differences_report_extremes() {
        let a = vec![1.0, 2.0, 3.0];
        let b: Vec<f64> = a.iter().map(|v| v - 2.0).collect();
        let r = paired_ttest(&a, &b).unwrap();
        assert_eq!(r.mean_diff, 2.0);
        assert_eq!(r.p_value, 0.0);
        assert!(r.t.is_infinite() && r.t > 0.0);
    }

    #[test]
    fn labels_follow_star_convention() {
        assert_eq!(significance_label(-20.663, 0.004), "-20.66**");
        assert_eq!(significance_label(3.1, 0.03), "3.10*");
        assert_eq!(significance_label(0.5, 0.2), "0.50");
    }
}
