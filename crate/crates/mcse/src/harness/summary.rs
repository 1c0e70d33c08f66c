//! Summary statistics over a study's replications: mean-squared errors
//! against truth, stopping proportions, effort, interval coverage, and
//! histogram extraction for the estimate distributions.

use super::ReplicationResult;
use crate::{Error, Result};

/// Per-functional summary line.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub functional: String,
    pub mse: f64,
    pub mse_se: f64,
    /// Fraction of replications whose interval covered the truth, with its
    /// binomial standard error. Only present when the study's criteria are
    /// half-widths.
    pub coverage: Option<(f64, f64)>,
}

/// Study-level summary: per-functional rows plus stopping statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub prop_at_minimum: (f64, f64),
    pub prop_at_most_1000: (f64, f64),
    pub mean_effort: (f64, f64),
    pub replications: usize,
    pub failed: usize,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn proportion_and_se(hits: usize, total: usize) -> (f64, f64) {
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

/// Summarizes a study against per-functional truth values. Failed
/// replications are excluded from every statistic but reported in the
/// `failed` count. When `with_coverage` is set, each replication's
/// recorded criterion is interpreted as a confidence half-width and
/// coverage of the truth is tallied.
pub fn summarize(
    results: &[ReplicationResult],
    truth: &[f64],
    names: &[String],
    with_coverage: bool,
) -> Result<SummaryTable> {
    if results.is_empty() {
        return Err(Error::Config("cannot summarize an empty study".into()));
    }
    if truth.len() != names.len() {
        return Err(Error::FunctionalCountMismatch {
            context: "summarize",
            expected: names.len(),
            got: truth.len(),
        });
    }
    let usable: Vec<&ReplicationResult> = results.iter().filter(|r| !r.failed).collect();
    let failed = results.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::Config("every replication failed".into()));
    }

    let mut rows = Vec::with_capacity(names.len());
    for (idx, name) in names.iter().enumerate() {
        let sq_errors: Vec<f64> = usable
            .iter()
            .map(|r| {
                let e = r.estimates[idx] - truth[idx];
                e * e
            })
            .collect();
        let (mse, mse_se) = mean_and_se(&sq_errors);
        let coverage = with_coverage.then(|| {
            let hits = usable
                .iter()
                .filter(|r| (r.estimates[idx] - truth[idx]).abs() <= r.criteria[idx])
                .count();
            proportion_and_se(hits, usable.len())
        });
        rows.push(SummaryRow {
            functional: name.clone(),
            mse,
            mse_se,
            coverage,
        });
    }

    let at_min = usable.iter().filter(|r| r.stopped_at_minimum).count();
    let at_most_1000 = usable.iter().filter(|r| r.n_total <= 1000).count();
    let efforts: Vec<f64> = usable.iter().map(|r| r.n_total as f64).collect();

    Ok(SummaryTable {
        rows,
        prop_at_minimum: proportion_and_se(at_min, usable.len()),
        prop_at_most_1000: proportion_and_se(at_most_1000, usable.len()),
        mean_effort: mean_and_se(&efforts),
        replications: results.len(),
        failed,
    })
}

/// Fixed-width bins over the observed range of one functional's estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// bins + 1 edges; bin i covers [edges[i], edges[i+1]), the last bin
    /// closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Interquartile range of the underlying estimates, recomputed from
    /// bin midpoints; a coarse spread measure for comparing settings.
    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }
}

/// Bins the (non-failed) estimates of one functional. Identical values
/// collapse into a single occupied bin.
pub fn emit_histogram(
    results: &[ReplicationResult],
    functional_idx: usize,
    bins: usize,
) -> Result<Histogram> {
    if results.is_empty() || bins == 0 {
        return Err(Error::Config("histogram needs results and at least one bin".into()));
    }
    let values: Vec<f64> = results
        .iter()
        .filter(|r| !r.failed)
        .map(|r| r.estimates[functional_idx])
        .collect();
    if values.is_empty() {
        return Err(Error::Config("every replication failed".into()));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi, bins) = if lo == hi {
        (lo, lo + 1.0, 1)
    } else {
        (lo, hi, bins)
    };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for v in values {
        let mut bin = ((v - lo) / width) as usize;
        if bin >= bins {
            bin = bins - 1; // right edge of the last bin is closed
        }
        counts[bin] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Interquartile range of one functional's (non-failed) estimates;
/// used to compare the spread of settings.
pub fn estimate_iqr(results: &[ReplicationResult], functional_idx: usize) -> Result<f64> {
    let mut values: Vec<f64> = results
        .iter()
        .filter(|r| !r.failed)
        .map(|r| r.estimates[functional_idx])
        .collect();
    if values.is_empty() {
        return Err(Error::Config("every replication failed".into()));
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |level: f64| {
        let idx = ((level * values.len() as f64).ceil() as usize).clamp(1, values.len()) - 1;
        values[idx]
    };
    Ok(q(0.75) - q(0.25))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn result(rep_id: usize, est: Vec<f64>, crit: Vec<f64>, n: u64) -> ReplicationResult {
        ReplicationResult {
            rep_id,
            n_total: n,
            stopped_at_minimum: n == 400,
            failed: false,
            estimates: est,
            criteria: crit,
            full_chain_estimates: None,
        }
    }

    #[test]
    fn exact_estimates_have_zero_mse() {
        let results = vec![
            result(0, vec![1.0], vec![0.1], 400),
            result(1, vec![1.0], vec![0.1], 500),
        ];
        let table = summarize(&results, &[1.0], &["g".to_string()], false).unwrap();
        assert_eq!(table.rows[0].mse, 0.0);
        assert_eq!(table.rows[0].mse_se, 0.0);
    }

    #[test]
    fn mse_se_hand_oracle() {
        // squared errors 0 and 2: MSE 1, sd sqrt(2), SE sd/sqrt(2) = 1
        let results = vec![
            result(0, vec![1.0], vec![0.1], 400),
            result(1, vec![1.0 + 2.0f64.sqrt()], vec![0.1], 500),
        ];
        let table = summarize(&results, &[1.0], &["g".to_string()], false).unwrap();
        assert_relative_eq!(table.rows[0].mse, 1.0, max_relative = 1e-12);
        assert_relative_eq!(table.rows[0].mse_se, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn proportions_and_coverage() {
        let results = vec![
            result(0, vec![1.05], vec![0.1], 400),
            result(1, vec![1.3], vec![0.1], 900),
            result(2, vec![0.98], vec![0.1], 1200),
            result(3, vec![1.02], vec![0.1], 2000),
        ];
        let table = summarize(&results, &[1.0], &["g".to_string()], true).unwrap();
        assert_eq!(table.prop_at_minimum.0, 0.25);
        assert_eq!(table.prop_at_most_1000.0, 0.5);
        // rep 1 misses the interval
        assert_eq!(table.rows[0].coverage.unwrap().0, 0.75);
        let (p, se) = table.prop_at_minimum;
        assert_relative_eq!(se, (p * (1.0 - p) / 4.0f64).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn failed_replications_excluded_but_counted() {
        let mut bad = result(1, vec![1000.0], vec![0.1], 10_000);
        bad.failed = true;
        let results = vec![result(0, vec![1.0], vec![0.1], 400), bad];
        let table = summarize(&results, &[1.0], &["g".to_string()], false).unwrap();
        assert_eq!(table.failed, 1);
        assert_eq!(table.replications, 2);
        assert_eq!(table.rows[0].mse, 0.0);
    }

    #[test]
    fn summary_permutation_invariant() {
        let a = vec![
            result(0, vec![1.1], vec![0.2], 400),
            result(1, vec![0.9], vec![0.2], 800),
            result(2, vec![1.3], vec![0.2], 1600),
        ];
        let mut b = a.clone();
        b.reverse();
        let ta = summarize(&a, &[1.0], &["g".to_string()], true).unwrap();
        let tb = summarize(&b, &[1.0], &["g".to_string()], true).unwrap();
        assert_eq!(ta.rows[0].mse.to_bits(), tb.rows[0].mse.to_bits());
        assert_eq!(ta.prop_at_minimum, tb.prop_at_minimum);
    }

    #[test]
    fn histogram_conserves_counts() {
        let results: Vec<ReplicationResult> = (0..100)
            .map(|i| result(i, vec![i as f64 / 10.0], vec![0.1], 400))
            .collect();
        let hist = emit_histogram(&results, 0, 12).unwrap();
        assert_eq!(hist.total(), 100);
        assert_eq!(hist.bin_count(), 12);
    }

    #[test]
    fn histogram_identical_values_single_bin() {
        let results: Vec<ReplicationResult> =
            (0..10).map(|i| result(i, vec![2.5], vec![0.1], 400)).collect();
        let hist = emit_histogram(&results, 0, 8).unwrap();
        assert_eq!(hist.bin_count(), 1);
        assert_eq!(hist.counts[0], 10);
    }

    #[test]
    fn empty_study_rejected() {
        assert!(summarize(&[], &[1.0], &["g".to_string()], false).is_err());
    }
}
