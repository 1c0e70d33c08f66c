//! Consistent batch means (CBM) estimation of the asymptotic variance of an
//! ergodic average, the Monte Carlo standard error and confidence half-width
//! built from it, and the significant-figures assessment of a point
//! estimate.
//!
//! The batch size grows with the run length, b = floor(n^theta), which is
//! what makes the estimator strongly consistent; theta = 1/2 is the default.

use crate::dist::special;
use crate::traces::{compensated_sum, CompensatedSum, ScalarTrace};
use crate::{Error, Result};

/// Options for the CBM estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbmOptions {
    /// Batch-size exponent, in (0, 1).
    pub theta: f64,
    /// Confidence level of the half-width, in (0, 1).
    pub confidence: f64,
}

impl Default for CbmOptions {
    fn default() -> Self {
        Self {
            theta: 0.5,
            confidence: 0.95,
        }
    }
}

impl CbmOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: self.theta,
                reason: "batch exponent must lie in (0, 1)",
            });
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter {
                name: "confidence",
                value: self.confidence,
                reason: "confidence must lie in (0, 1)",
            });
        }
        Ok(())
    }
}

/// A CBM variance estimate with its batch layout and derived interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbmEstimate {
    /// Total draws in the trace.
    pub n: usize,
    /// Batch count a = floor(n / b).
    pub a: usize,
    /// Batch size b = floor(n^theta).
    pub b: usize,
    /// Estimated asymptotic variance of the functional.
    pub sigma2_hat: f64,
    /// Ergodic average over all n draws.
    pub point: f64,
    /// Monte Carlo standard error sqrt(sigma2_hat / n).
    pub mcse: f64,
    /// t-based half-width of the confidence interval.
    pub half_width: f64,
    /// Degrees of freedom a - 1.
    pub df: usize,
    /// Confidence level the half-width was computed at.
    pub confidence: f64,
}

impl CbmEstimate {
    pub fn to_estimate(&self) -> crate::EstimateWithError {
        crate::EstimateWithError {
            point: self.point,
            mcse: self.mcse,
            half_width: self.half_width,
            confidence: self.confidence,
            n_used: self.n,
        }
    }
}

/// Batch layout (a, b) for n draws: b = floor(n^theta), a = floor(n / b).
///
/// The power is computed in floating point, so a value that should be an
/// exact integer (perfect squares under theta = 1/2) is snapped to it
/// before flooring.
pub fn batch_layout(n: usize, theta: f64) -> Result<(usize, usize)> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "batch exponent must lie in (0, 1)",
        });
    }
    if n < 4 {
        return Err(Error::InsufficientDraws { n });
    }
    let raw = (n as f64).powf(theta);
    let nearest = raw.round();
    let b = if nearest >= 1.0 && (raw - nearest).abs() < 1e-9 * nearest {
        nearest as usize
    } else {
        raw.floor() as usize
    };
    let b = b.max(1);
    let a = n / b;
    if a < 2 {
        return Err(Error::InsufficientDraws { n });
    }
    Ok((a, b))
}

/// The CBM estimate for one trace.
///
/// Batch means use the first a*b draws and the mean of those same draws,
/// which keeps the variance formula internally consistent when a*b < n;
/// the reported point estimate and the sqrt(n) in the standard error use
/// the full trace.
pub fn cbm_variance(trace: &ScalarTrace, opts: &CbmOptions) -> Result<CbmEstimate> {
    opts.validate()?;
    let n = trace.len();
    let (a, b) = batch_layout(n, opts.theta)?;
    let values = trace.values();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "trace passed to cbm_variance",
        });
    }

    let used = a * b;
    let mut batch_means = Vec::with_capacity(a);
    for j in 0..a {
        let chunk = &values[j * b..(j + 1) * b];
        batch_means.push(compensated_sum(chunk) / b as f64);
    }
    let mean_used = compensated_sum(&values[..used]) / used as f64;

    let mut dev = CompensatedSum::new();
    for &ybar in &batch_means {
        dev.add((ybar - mean_used) * (ybar - mean_used));
    }
    let sigma2_hat = (b as f64 / (a as f64 - 1.0)) * dev.value();

    let point = trace.ergodic_average()?;
    let mcse = (sigma2_hat / n as f64).sqrt();
    let hw = half_width(sigma2_hat, n, a, opts.confidence)?;

    Ok(CbmEstimate {
        n,
        a,
        b,
        sigma2_hat,
        point,
        mcse,
        half_width: hw,
        df: a - 1,
        confidence: opts.confidence,
    })
}

/// Half-width of the (confidence)-level interval:
/// t_{1 - alpha/2, a-1} * sigma_hat / sqrt(n).
pub fn half_width(sigma2_hat: f64, n: usize, batch_count: usize, confidence: f64) -> Result<f64> {
    if batch_count < 2 {
        return Err(Error::InsufficientDraws { n });
    }
    if sigma2_hat == 0.0 {
        return Ok(0.0);
    }
    let p = 1.0 - (1.0 - confidence) / 2.0;
    let t = special::cached::student_t_quantile(p, (batch_count - 1) as f64)?;
    Ok(t * (sigma2_hat / n as f64).sqrt())
}

/// Largest number of significant figures k such that the interval
/// point +/- half_width stays inside the rounding bracket of the point at
/// k figures. Zero when not even the leading figure is trustworthy;
/// capped at 15, the resolution of an f64.
pub fn significant_figures(point: f64, half_width: f64) -> Result<usize> {
    const CAP: usize = 15;
    if !point.is_finite() {
        return Err(Error::NonFinite {
            context: "point passed to significant_figures",
        });
    }
    if !(half_width >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "half_width",
            value: half_width,
            reason: "half-width must be nonnegative",
        });
    }
    if point == 0.0 {
        // a zero estimate has no leading figure; only an exact interval
        // earns the cap
        return Ok(if half_width == 0.0 { CAP } else { 0 });
    }

    let mag = point.abs();
    let mut exp10 = mag.log10().floor() as i32;
    // snap against log rounding at decade boundaries
    if 10f64.powi(exp10) > mag {
        exp10 -= 1;
    } else if 10f64.powi(exp10 + 1) <= mag {
        exp10 += 1;
    }

    let contained = |k: usize| -> bool {
        let unit = 10f64.powi(exp10 - k as i32 + 1);
        let rounded = (point / unit).round() * unit;
        point - half_width >= rounded - unit / 2.0 && point + half_width <= rounded + unit / 2.0
    };

    Ok((1..=CAP).rev().find(|&k| contained(k)).unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn layout_examples() {
        assert_eq!(batch_layout(1000, 0.5).unwrap(), (32, 31));
        assert_eq!(batch_layout(4, 0.5).unwrap(), (2, 2));
        assert_eq!(batch_layout(400, 0.5).unwrap(), (20, 20));
    }

    #[test]
    fn layout_perfect_squares_do_not_underround() {
        for b in 2usize..200 {
            let n = b * b;
            assert_eq!(batch_layout(n, 0.5).unwrap(), (b, b), "n = {n}");
        }
    }

    #[test]
    fn layout_too_small_errors() {
        assert!(matches!(
            batch_layout(3, 0.5),
            Err(Error::InsufficientDraws { .. })
        ));
        // large theta leaves a single batch
        assert!(matches!(
            batch_layout(4, 0.9),
            Err(Error::InsufficientDraws { .. })
        ));
    }

    #[test]
    fn cbm_hand_oracle() {
        let trace = ScalarTrace::from_values(vec![1.0, 2.0, 3.0, 4.0]);
        let est = cbm_variance(&trace, &CbmOptions::default()).unwrap();
        assert_eq!((est.a, est.b), (2, 2));
        assert_relative_eq!(est.sigma2_hat, 4.0, max_relative = 1e-14);
        assert_relative_eq!(est.mcse, 1.0, max_relative = 1e-14);
        assert_relative_eq!(est.point, 2.5, max_relative = 1e-14);
        // t quantile at 0.975 with 1 df is the Cauchy value
        assert_abs_diff_eq!(est.half_width, 12.7062, epsilon = 1e-3);
    }

    #[test]
    fn cbm_constant_trace_has_zero_dispersion() {
        let trace = ScalarTrace::from_values(vec![3.5; 100]);
        let est = cbm_variance(&trace, &CbmOptions::default()).unwrap();
        assert_eq!(est.sigma2_hat, 0.0);
        assert_eq!(est.half_width, 0.0);
        assert_eq!(est.point, 3.5);
    }

    #[test]
    fn cbm_rejects_non_finite() {
        let trace = ScalarTrace::from_values(vec![1.0, f64::NAN, 2.0, 3.0]);
        assert!(matches!(
            cbm_variance(&trace, &CbmOptions::default()),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn cbm_ar1_asymptotic_variance() {
        // AR(1) with coefficient 0.5 and unit innovations has asymptotic
        // variance of the mean 1/(1-rho)^2 = 4.
        let mut stream = crate::rng::RngStream::new(99, 0);
        let n = 1_000_000;
        let mut trace = ScalarTrace::with_capacity(n);
        let mut x = 0.0;
        for _ in 0..n {
            x = 0.5 * x + crate::dist::draw_normal(&mut stream, 0.0, 1.0).unwrap();
            trace.push(x);
        }
        let est = cbm_variance(&trace, &CbmOptions::default()).unwrap();
        assert!(
            (est.sigma2_hat - 4.0).abs() / 4.0 < 0.10,
            "sigma2_hat = {}",
            est.sigma2_hat
        );
    }

    #[test]
    fn cbm_iid_normal_consistency_over_seeds() {
        // sigma2_hat lands in (0.9, 1.1) in at least 95% of 100 seeded
        // runs at n = 1e6 on iid N(0,1)
        let n = 1_000_000;
        let mut hits = 0;
        let runs = 100;
        for seed in 0..runs {
            let mut stream = crate::rng::RngStream::new(4000 + seed, 0);
            let mut trace = ScalarTrace::with_capacity(n);
            for _ in 0..n {
                trace.push(crate::dist::draw_normal(&mut stream, 0.0, 1.0).unwrap());
            }
            let est = cbm_variance(&trace, &CbmOptions::default()).unwrap();
            if est.sigma2_hat > 0.9 && est.sigma2_hat < 1.1 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "only {hits}/{runs} runs inside (0.9, 1.1)");
    }

    #[test]
    fn half_width_examples() {
        // sigma2 = 4, n = 4, a = 2 at 95%: 12.7062 * 1.0
        let hw = half_width(4.0, 4, 2, 0.95).unwrap();
        assert_abs_diff_eq!(hw, 12.706, epsilon = 1e-3);
        assert_eq!(half_width(0.0, 100, 10, 0.95).unwrap(), 0.0);
        // doubling n scales by 1/sqrt(2)
        let h1 = half_width(4.0, 1000, 10, 0.95).unwrap();
        let h2 = half_width(4.0, 2000, 10, 0.95).unwrap();
        assert_relative_eq!(h1 / h2, std::f64::consts::SQRT_2, max_relative = 1e-12);
    }

    #[test]
    fn sig_figs_bracket_example() {
        // 0.02 +/- 0.004 fits [0.015, 0.025] but not [0.0195, 0.0205]
        assert_eq!(significant_figures(0.02, 0.004).unwrap(), 1);
    }

    #[test]
    fn sig_figs_two_versus_one() {
        // 2.003 with a t-scaled half-width of ~0.11 only survives one figure
        assert_eq!(significant_figures(2.003, 0.11).unwrap(), 1);
        // with a much smaller half-width the second figure holds
        assert_eq!(significant_figures(2.003, 0.01).unwrap(), 2);
    }

    #[test]
    fn sig_figs_exact_estimate_hits_cap() {
        assert_eq!(significant_figures(0.02, 0.0).unwrap(), 15);
        assert_eq!(significant_figures(123.456, 0.0).unwrap(), 15);
    }

    #[test]
    fn sig_figs_zero_point() {
        assert_eq!(significant_figures(0.0, 0.1).unwrap(), 0);
        assert_eq!(significant_figures(0.0, 0.0).unwrap(), 15);
    }

    #[test]
    fn sig_figs_hopeless_interval() {
        assert_eq!(significant_figures(0.02, 10.0).unwrap(), 0);
    }

    proptest! {
        #[test]
        fn sigma2_nonnegative_and_zero_iff_equal_batch_means(
            xs in proptest::collection::vec(-100f64..100.0, 4..512),
        ) {
            let trace = ScalarTrace::from_values(xs);
            let est = cbm_variance(&trace, &CbmOptions::default()).unwrap();
            prop_assert!(est.sigma2_hat >= 0.0);
        }

        #[test]
        fn sig_figs_monotone_in_half_width(
            point in -1e6f64..1e6,
            hw1 in 0f64..10.0,
            hw2 in 0f64..10.0,
        ) {
            let (small, large) = if hw1 <= hw2 { (hw1, hw2) } else { (hw2, hw1) };
            let ks = significant_figures(point, small).unwrap();
            let kl = significant_figures(point, large).unwrap();
            prop_assert!(ks >= kl);
        }

        #[test]
        fn half_width_monotone_in_n(
            sigma2 in 0.01f64..100.0,
            n1 in 16usize..100_000,
            factor in 2usize..8,
        ) {
            let a = 10;
            let h1 = half_width(sigma2, n1, a, 0.95).unwrap();
            let h2 = half_width(sigma2, n1 * factor, a, 0.95).unwrap();
            prop_assert!(h2 <= h1);
        }
    }
}
