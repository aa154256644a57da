//! One-sample Kolmogorov-Smirnov test against a centred Gaussian, with the
//! thinning rule used to decorrelate measurement-chain samples.

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::scalar::Real;

pub const MIN_SAMPLES: usize = 100;

/// Lag correlation the thinned series may retain.
pub const THINNING_THRESHOLD: f64 = 0.05;

/// Asymptotic 1% critical value of `√n · D`.
pub const CRITICAL_1PCT: f64 = 1.63;

/// KS distance between the empirical distribution of `samples` and
/// `𝒢(0, sigma_target)`.
pub fn normality_statistic<T: Real>(samples: &[T], sigma_target: T) -> Result<T> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let target = Gaussian::centered(sigma_target)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples are not NaN"));
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = target.cdf(x).as_f64();
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0f64, f64::max);
    Ok(T::lit(d))
}

/// Smallest stride `k` with `|ρ|^k < THINNING_THRESHOLD`.
pub fn thinning_stride<T: Real>(rho: T) -> usize {
    let r = rho.abs().as_f64();
    let mut k = 1;
    let mut p = r;
    while p >= THINNING_THRESHOLD {
        k += 1;
        p *= r;
    }
    k
}

pub fn thin<T: Copy>(samples: &[T], stride: usize) -> Vec<T> {
    samples.iter().step_by(stride.max(1)).copied().collect()
}

pub fn critical_value_1pct(n: usize) -> f64 {
    CRITICAL_1PCT / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub n: usize,
    pub stride: usize,
    pub critical: f64,
}

impl KsOutcome {
    pub fn passed(&self) -> bool {
        self.statistic < self.critical
    }
}

/// Thin a chain record by its memory coefficient, then test it against
/// `𝒢(0, sigma_target)` at the 1% level.
pub fn thinned_normality<T: Real>(samples: &[T], rho: T, sigma_target: T) -> Result<KsOutcome> {
    let stride = thinning_stride(rho);
    let thinned = thin(samples, stride);
    let statistic = normality_statistic(&thinned, sigma_target)?.as_f64();
    Ok(KsOutcome {
        statistic,
        n: thinned.len(),
        stride,
        critical: critical_value_1pct(thinned.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NormalStream;

    #[test]
    fn empty_and_short_inputs() {
        assert!(matches!(
            normality_statistic::<f64>(&[], 1.0),
            Err(Error::InsufficientSamples { .. })
        ));
        assert!(normality_statistic(&[0.0; 99], 1.0).is_err());
    }

    #[test]
    fn gaussian_samples_pass_calibration() {
        let mut passes = 0;
        for seed in 0..100u64 {
            let mut rng = NormalStream::new(seed, 0);
            let xs: Vec<f64> = (0..2000).map(|_| 1.7 * rng.standard_normal()).collect();
            let d = normality_statistic(&xs, 1.7).unwrap();
            if d < critical_value_1pct(xs.len()) {
                passes += 1;
            }
        }
        assert!(passes >= 98, "passes {passes}");
    }

    #[test]
    fn uniform_samples_rejected() {
        let mut rng = NormalStream::new(3, 0);
        let xs: Vec<f64> = (0..5000).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        let d = normality_statistic(&xs, 1.0).unwrap();
        assert!(d > critical_value_1pct(xs.len()), "d {d}");
    }

    #[test]
    fn known_statistic() {
        // 100 evenly spread quantiles: D is exactly the half-step offset.
        let g = Gaussian::centered(1.0f64).unwrap();
        let xs: Vec<f64> = (0..100)
            .map(|i| {
                let p = (i as f64 + 0.5) / 100.0;
                // invert the CDF by bisection
                let (mut lo, mut hi) = (-10.0, 10.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if g.cdf(mid) < p {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let d = normality_statistic(&xs, 1.0).unwrap();
        assert!((d - 0.005).abs() < 1e-12, "{d}");
    }

    #[test]
    fn stride_rule() {
        assert_eq!(thinning_stride(0.0f64), 1);
        assert_eq!(thinning_stride(0.04f64), 1);
        assert_eq!(thinning_stride(0.309f64), 3);
        assert_eq!(thinning_stride(-0.9f64), 29);
        assert_eq!(thin(&[1, 2, 3, 4, 5, 6, 7], 3), vec![1, 4, 7]);
    }
}
