//! The corrected potential scale reduction factor and its 97.5% upper
//! bound for a set of parallel chains.
//!
//! The upper bound is the stopping statistic of the multi-chain rule: it
//! inflates the between/within variance ratio by an F quantile whose second
//! degrees of freedom are estimated from the spread of the per-chain
//! variances. Degenerate inputs (equal chain variances, a vanishing
//! variance-of-variance estimate) fall back to the exact limiting values
//! instead of dividing by zero.

use crate::dist::special;
use crate::traces::MultiChainTrace;
use crate::{Error, Result};

/// Everything the diagnostic computes for one functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsrfReport {
    /// Chain count.
    pub m: usize,
    /// Retained per-chain length.
    pub l: usize,
    /// Between-chain variance component B.
    pub between: f64,
    /// Within-chain variance W.
    pub within: f64,
    /// Pooled variance estimate V-hat.
    pub v_hat: f64,
    /// Estimated variance of V-hat (zero or negative means degenerate).
    pub var_v_hat: f64,
    /// Moment-matched degrees of freedom d = 2 V-hat^2 / var(V-hat);
    /// infinite when degenerate.
    pub d: f64,
    /// Corrected potential scale reduction factor.
    pub r_hat: f64,
    /// Sample variance of the per-chain variances.
    pub sigma2_within: f64,
    /// Second degrees of freedom w = 2 W^2 / sigma2_within of the F
    /// quantile; infinite when the chain variances are all equal.
    pub w_df: f64,
    /// 97.5% upper bound on R-hat.
    pub r_upper: f64,
}

/// Between- and within-chain variance components, with the per-chain means
/// and variances they are built from.
pub fn between_within(multi: &MultiChainTrace) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
    let m = multi.chain_count();
    let l = multi.per_chain_length();
    if l < 2 {
        return Err(Error::ChainTooShort {
            len: l,
            reason: "within-chain variance needs at least 2 draws",
        });
    }

    let mut means = Vec::with_capacity(m);
    let mut vars = Vec::with_capacity(m);
    for chain in multi.chains() {
        let mean = chain.ergodic_average()?;
        let mut ss = 0.0;
        for &y in chain.values() {
            ss += (y - mean) * (y - mean);
        }
        means.push(mean);
        vars.push(ss / (l as f64 - 1.0));
    }

    let grand = means.iter().sum::<f64>() / m as f64;
    let between = l as f64 / (m as f64 - 1.0)
        * means.iter().map(|ybar| (ybar - grand) * (ybar - grand)).sum::<f64>();
    let within = vars.iter().sum::<f64>() / m as f64;

    if within == 0.0 {
        return Err(Error::DegenerateWithinVariance);
    }
    Ok((between, within, means, vars))
}

/// The corrected potential scale reduction factor report.
pub fn psrf(multi: &MultiChainTrace) -> Result<PsrfReport> {
    let (between, within, means, vars) = between_within(multi)?;
    let m = multi.chain_count();
    let l = multi.per_chain_length();
    let (mf, lf) = (m as f64, l as f64);

    let grand = means.iter().sum::<f64>() / mf;
    let v_hat = (lf - 1.0) / lf * within + (mf + 1.0) * between / (mf * lf);

    let sigma2_within = vars.iter().map(|s2| (s2 - within) * (s2 - within)).sum::<f64>()
        / (mf - 1.0);

    // sample covariances across chains of s_j^2 against the chain means
    // and squared chain means
    let mean_of_means = grand;
    let mean_of_sq_means = means.iter().map(|x| x * x).sum::<f64>() / mf;
    let mut cov_s2_mean = 0.0;
    let mut cov_s2_meansq = 0.0;
    for (s2, ybar) in vars.iter().zip(&means) {
        cov_s2_mean += (s2 - within) * (ybar - mean_of_means);
        cov_s2_meansq += (s2 - within) * (ybar * ybar - mean_of_sq_means);
    }
    cov_s2_mean /= mf - 1.0;
    cov_s2_meansq /= mf - 1.0;

    let var_v_hat = ((lf - 1.0) / lf).powi(2) * sigma2_within / mf
        + ((mf + 1.0) / (mf * lf)).powi(2) * (2.0 / (mf - 1.0)) * between * between
        + 2.0 * ((mf + 1.0) * (lf - 1.0) / (mf * lf * lf))
            * (lf / mf)
            * (cov_s2_meansq - 2.0 * grand * cov_s2_mean);

    // chi-square moment matching; a vanishing variance estimate means the
    // correction factor is exactly 1
    let (d, correction) = if var_v_hat > 0.0 {
        let d = 2.0 * v_hat * v_hat / var_v_hat;
        (d, (d + 3.0) / (d + 1.0))
    } else {
        (f64::INFINITY, 1.0)
    };

    let r_hat = (correction * v_hat / within).sqrt();

    let w_df = if sigma2_within > 0.0 {
        2.0 * within * within / sigma2_within
    } else {
        f64::INFINITY
    };

    let mut report = PsrfReport {
        m,
        l,
        between,
        within,
        v_hat,
        var_v_hat,
        d,
        r_hat,
        sigma2_within,
        w_df,
        r_upper: f64::NAN,
    };
    report.r_upper = psrf_upper(&report)?;
    Ok(report)
}

/// The 97.5% upper bound on R-hat from a computed report. When the F
/// quantile's second degrees of freedom degenerate (all chain variances
/// equal) the quantile is taken at its infinite-df limit, which equals
/// chi-square(m-1)/(m-1).
pub fn psrf_upper(report: &PsrfReport) -> Result<f64> {
    let (mf, lf) = (report.m as f64, report.l as f64);
    let correction = if report.var_v_hat > 0.0 {
        (report.d + 3.0) / (report.d + 1.0)
    } else {
        1.0
    };
    let f_quant = if report.w_df.is_finite() {
        special::f_quantile(0.975, mf - 1.0, report.w_df)?
    } else {
        special::f_quantile_unbounded_df2(0.975, mf - 1.0)?
    };
    let inner = (lf - 1.0) / lf
        + f_quant * ((mf + 1.0) / (mf * lf)) * (report.between / report.within);
    Ok((correction * inner).sqrt())
}
