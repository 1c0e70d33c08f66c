//! Incremental fixed-width checking for long runs with frequent checks.
//!
//! The geo arm re-checks every 10 draws over runs of 10^5 or more, so
//! recomputing batch means from the raw trace at every check would cost
//! O(n^2) per replication. Prefix sums bring one check down to O(a): a
//! batch mean is a difference of two prefix entries. The arithmetic is the
//! same batch-means estimator; only the summation path differs, and a test
//! pins it to the reference implementation.

use crate::batch_means::{batch_layout, half_width};
use crate::Result;

/// Prefix-sum view of one functional's trace.
#[derive(Debug, Clone)]
pub(crate) struct PrefixTrace {
    prefix: Vec<f64>,
}

impl PrefixTrace {
    pub fn new(capacity: usize) -> Self {
        let mut prefix = Vec::with_capacity(capacity + 1);
        prefix.push(0.0);
        Self { prefix }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        let last = *self.prefix.last().expect("prefix starts with 0");
        self.prefix.push(last + x);
    }

    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    fn range_mean(&self, start: usize, end: usize) -> f64 {
        (self.prefix[end] - self.prefix[start]) / (end - start) as f64
    }

    /// Batch-means half-width at the current length.
    pub fn half_width(&self, theta: f64, confidence: f64) -> Result<f64> {
        let n = self.len();
        let (a, b) = batch_layout(n, theta)?;
        let used = a * b;
        let mean_used = self.range_mean(0, used);
        let mut dev = 0.0;
        for j in 0..a {
            let ybar = self.range_mean(j * b, (j + 1) * b);
            dev += (ybar - mean_used) * (ybar - mean_used);
        }
        let sigma2 = (b as f64 / (a as f64 - 1.0)) * dev;
        half_width(sigma2, n, a, confidence)
    }
}
