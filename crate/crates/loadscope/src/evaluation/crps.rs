use crate::stats::{norm_cdf, norm_pdf};

use super::EvalError;

/// CRPS of a Gaussian forecast N(mu, sigma^2) against observation `y`, in
/// the units of `y`.
///
/// Closed form: sigma * [z*(2*Phi(z) - 1) + 2*phi(z) - 1/sqrt(pi)] with
/// z = (y - mu)/sigma. As sigma shrinks toward a point mass this tends to
/// |y - mu|.
pub fn crps_gaussian(mu: f64, sigma: f64, y: f64) -> Result<f64, EvalError> {
    if !(sigma > 0.0) {
        return Err(EvalError::NonPositiveSigma { index: 0, sigma });
    }
    let z = (y - mu) / sigma;
    Ok(sigma * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - 1.0 / std::f64::consts::PI.sqrt()))
}

/// Mean CRPS over aligned forecast/observation slices.
pub fn crps_batch(mu: &[f64], sigma: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if mu.is_empty() || mu.len() != sigma.len() || mu.len() != y.len() {
        return Err(EvalError::Misaligned(format!(
            "{} mu, {} sigma, {} observations",
            mu.len(),
            sigma.len(),
            y.len()
        )));
    }
    let mut total = 0.0;
    for i in 0..mu.len() {
        if !(sigma[i] > 0.0) {
            return Err(EvalError::NonPositiveSigma { index: i, sigma: sigma[i] });
        }
        total += crps_gaussian(mu[i], sigma[i], y[i])?;
    }
    Ok(total / mu.len() as f64)
}

#[cfg(test)]
pub(crate) mod oracle {
    use crate::stats::norm_cdf;

    /// CRPS by direct numeric integration of (F(t) - 1{t >= y})^2.
    ///
    /// The integrand is smooth on each side of the step at `y`, so Simpson
    /// on [mu - 12 sigma, y] and [y, mu + 12 sigma] separately converges
    /// fast; tails beyond 12 sigma contribute < 1e-30.
    pub fn crps_by_integration(mu: f64, sigma: f64, y: f64) -> f64 {
        let lo = (mu - 12.0 * sigma).min(y);
        let hi = (mu + 12.0 * sigma).max(y);
        let below = |t: f64| {
            let f = norm_cdf((t - mu) / sigma);
            f * f
        };
        let above = |t: f64| {
            let f = norm_cdf((t - mu) / sigma) - 1.0;
            f * f
        };
        simpson(lo, y, 4000, below) + simpson(y, hi, 4000, above)
    }

    fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::crps_by_integration;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_normal_spot_values() {
        // Zero-error and one-sigma-error observations of N(0, 1).
        let at_zero = crps_gaussian(0.0, 1.0, 0.0).unwrap();
        assert!((at_zero - 0.23370).abs() < 1e-4, "got {at_zero}");
        let at_one = crps_gaussian(0.0, 1.0, 1.0).unwrap();
        assert!((at_one - 0.60244).abs() < 1e-4, "got {at_one}");
    }

    #[test]
    fn point_mass_limit_is_absolute_error() {
        let tiny = crps_gaussian(100.0, 1e-9, 100.0).unwrap();
        assert!(tiny.abs() < 1e-9);
        let off = crps_gaussian(100.0, 1e-9, 103.0).unwrap();
        assert!((off - 3.0).abs() < 1e-6);
    }

    #[test]
    fn closed_form_matches_numeric_integration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut worst = 0.0f64;
        for _ in 0..60 {
            let mu = rng.random_range(-50.0..50.0);
            let sigma = rng.random_range(0.1..20.0);
            let y = mu + sigma * rng.random_range(-4.0..4.0);
            let exact = crps_gaussian(mu, sigma, y).unwrap();
            let numeric = crps_by_integration(mu, sigma, y);
            worst = worst.max((exact - numeric).abs());
        }
        assert!(worst < 1e-6, "worst deviation {worst}");
    }

    #[test]
    fn batch_averages_elementwise_scores() {
        let mu = [1.0, 2.0, 3.0];
        let sigma = [0.5, 1.0, 2.0];
        let y = [1.2, 1.5, 6.0];
        let batch = crps_batch(&mu, &sigma, &y).unwrap();
        let manual: f64 = (0..3)
            .map(|i| crps_gaussian(mu[i], sigma[i], y[i]).unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((batch - manual).abs() < 1e-15);
    }

    #[test]
    fn invalid_sigma_reports_index() {
        assert!(matches!(
            crps_gaussian(0.0, 0.0, 0.0),
            Err(EvalError::NonPositiveSigma { .. })
        ));
        let err = crps_batch(&[0.0, 0.0], &[1.0, -2.0], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, EvalError::NonPositiveSigma { index: 1, .. }));
    }
}
