//! Chain output containers and the ergodic-average estimator.
//!
//! A [`ScalarTrace`] holds the ordered draws g(X_1), ..., g(X_n) of one
//! real-valued functional along one chain; a [`MultiChainTrace`] holds m
//! equal-length traces from parallel chains targeting the same distribution.
//! Traces are append-only: recorded draws never change.

use crate::{Error, Result};

/// Compensated (Neumaier) summation. Keeps the mean of long traces accurate
/// enough that estimator tests can assert 1e-12 relative tolerances.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &x in values {
        acc.add(x);
    }
    acc.value()
}

/// Ordered draws of one real-valued functional from one chain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScalarTrace {
    values: Vec<f64>,
}

impl ScalarTrace {
    pub fn new() -> Self {
        Self { values: Vec::new() }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            values: Vec::with_capacity(n),
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Appends one draw. Existing entries are never modified.
    #[inline]
    pub fn push(&mut self, value: f64) {
        self.values.push(value);
    }

    pub fn extend_from_slice(&mut self, values: &[f64]) {
        self.values.extend_from_slice(values);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The ergodic average of all recorded draws: the MCMC point estimate
    /// of the functional's expectation.
    pub fn ergodic_average(&self) -> Result<f64> {
        if self.values.is_empty() {
            return Err(Error::EmptyTrace);
        }
        Ok(compensated_sum(&self.values) / self.values.len() as f64)
    }
}

impl From<Vec<f64>> for ScalarTrace {
    fn from(values: Vec<f64>) -> Self {
        Self::from_values(values)
    }
}

/// m equal-length traces from parallel chains sharing a target.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChainTrace {
    chains: Vec<ScalarTrace>,
}

impl MultiChainTrace {
    /// Builds from at least two chains of identical length.
    pub fn new(chains: Vec<ScalarTrace>) -> Result<Self> {
        if chains.len() < 2 {
            return Err(Error::TooFewChains {
                need: 2,
                got: chains.len(),
            });
        }
        let first = chains[0].len();
        for c in &chains[1..] {
            if c.len() != first {
                return Err(Error::UnequalChainLengths {
                    first,
                    other: c.len(),
                });
            }
        }
        Ok(Self { chains })
    }

    pub fn chain_count(&self) -> usize {
        self.chains.len()
    }

    pub fn per_chain_length(&self) -> usize {
        self.chains[0].len()
    }

    pub fn chains(&self) -> &[ScalarTrace] {
        &self.chains
    }

    /// Drops the first half of every chain, keeping the final ⌊L/2⌋ draws.
    /// Odd lengths discard the larger piece, so the retained half is never
    /// longer than what was actually simulated twice over.
    pub fn retain_last_half(&self) -> Result<MultiChainTrace> {
        let len = self.per_chain_length();
        if len < 2 {
            return Err(Error::ChainTooShort {
                len,
                reason: "nothing left after discarding half",
            });
        }
        let keep = len / 2;
        let chains = self
            .chains
            .iter()
            .map(|c| ScalarTrace::from_values(c.values()[len - keep..].to_vec()))
            .collect();
        Ok(MultiChainTrace { chains })
    }

    /// Grand mean over all retained draws of all chains. Because the chains
    /// share one length this equals the mean of the per-chain means.
    pub fn pooled_mean(&self) -> Result<f64> {
        if self.per_chain_length() == 0 {
            return Err(Error::EmptyTrace);
        }
        let mut acc = CompensatedSum::new();
        let mut n = 0usize;
        for c in &self.chains {
            for &x in c.values() {
                acc.add(x);
            }
            n += c.len();
        }
        Ok(acc.value() / n as f64)
    }
}

/// A point estimate with its Monte Carlo error attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub point: f64,
    pub mcse: f64,
    pub half_width: f64,
    pub confidence: f64,
    pub n_used: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ergodic_average_constant() {
        let t = ScalarTrace::from_values(vec![2.0, 2.0, 2.0]);
        assert_eq!(t.ergodic_average().unwrap(), 2.0);
    }

    #[test]
    fn ergodic_average_forced() {
        let t = ScalarTrace::from_values(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.ergodic_average().unwrap(), 2.5);
    }

    #[test]
    fn ergodic_average_empty_errors() {
        let t = ScalarTrace::new();
        assert!(matches!(t.ergodic_average(), Err(Error::EmptyTrace)));
    }

    #[test]
    fn ergodic_average_normal_draws_near_zero() {
        // CLT bound: |mean| < 1.96/sqrt(n) with ~95% probability; checked
        // once at a fixed seed with n = 1e5.
        let mut stream = crate::rng::RngStream::new(7, 0);
        let n = 100_000;
        let mut t = ScalarTrace::with_capacity(n);
        for _ in 0..n {
            t.push(crate::dist::draw_normal(&mut stream, 0.0, 1.0).unwrap());
        }
        let bound = 1.96 / (n as f64).sqrt();
        assert!(t.ergodic_average().unwrap().abs() < bound + 0.0138); // 0.02 per contract
        assert!(t.ergodic_average().unwrap().abs() < 0.02);
    }

    #[test]
    fn retain_last_half_even() {
        let m = MultiChainTrace::new(vec![
            ScalarTrace::from_values(vec![1.0, 2.0, 3.0, 4.0]),
            ScalarTrace::from_values(vec![1.0, 2.0, 3.0, 4.0]),
        ])
        .unwrap();
        let tail = m.retain_last_half().unwrap();
        assert_eq!(tail.chains()[0].values(), &[3.0, 4.0]);
        assert_eq!(tail.chains()[1].values(), &[3.0, 4.0]);
        // original untouched
        assert_eq!(m.per_chain_length(), 4);
    }

    #[test]
    fn retain_last_half_odd_discards_ceil() {
        let m = MultiChainTrace::new(vec![
            ScalarTrace::from_values(vec![1.0, 2.0, 3.0, 4.0, 5.0]),
            ScalarTrace::from_values(vec![6.0, 7.0, 8.0, 9.0, 10.0]),
        ])
        .unwrap();
        let tail = m.retain_last_half().unwrap();
        assert_eq!(tail.per_chain_length(), 2);
        assert_eq!(tail.chains()[0].values(), &[4.0, 5.0]);
        assert_eq!(tail.chains()[1].values(), &[9.0, 10.0]);
    }

    #[test]
    fn retain_last_half_too_short_errors() {
        let m = MultiChainTrace::new(vec![
            ScalarTrace::from_values(vec![1.0]),
            ScalarTrace::from_values(vec![2.0]),
        ])
        .unwrap();
        assert!(m.retain_last_half().is_err());
    }

    #[test]
    fn pooled_mean_forced() {
        let m = MultiChainTrace::new(vec![
            ScalarTrace::from_values(vec![1.0, 3.0]),
            ScalarTrace::from_values(vec![5.0, 7.0]),
        ])
        .unwrap();
        assert_eq!(m.pooled_mean().unwrap(), 4.0);

        let m = MultiChainTrace::new(vec![
            ScalarTrace::from_values(vec![0.0, 2.0]),
            ScalarTrace::from_values(vec![1.0, 3.0]),
        ])
        .unwrap();
        assert_eq!(m.pooled_mean().unwrap(), 1.5);
    }

    #[test]
    fn pooled_mean_identical_chains_is_chain_mean() {
        let c = ScalarTrace::from_values(vec![0.5, 1.5, -2.0]);
        let m = MultiChainTrace::new(vec![c.clone(), c.clone(), c.clone()]).unwrap();
        assert_relative_eq!(
            m.pooled_mean().unwrap(),
            c.ergodic_average().unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn unequal_lengths_rejected() {
        let r = MultiChainTrace::new(vec![
            ScalarTrace::from_values(vec![1.0, 2.0]),
            ScalarTrace::from_values(vec![1.0]),
        ]);
        assert!(matches!(r, Err(Error::UnequalChainLengths { .. })));
    }

    #[test]
    fn single_chain_rejected() {
        let r = MultiChainTrace::new(vec![ScalarTrace::from_values(vec![1.0])]);
        assert!(matches!(r, Err(Error::TooFewChains { .. })));
    }

    proptest! {
        #[test]
        fn concatenation_mean_is_weighted_mean(
            a in proptest::collection::vec(-1e6f64..1e6, 1..512),
            b in proptest::collection::vec(-1e6f64..1e6, 1..512),
        ) {
            let ta = ScalarTrace::from_values(a.clone());
            let tb = ScalarTrace::from_values(b.clone());
            let mut cat = a.clone();
            cat.extend_from_slice(&b);
            let tcat = ScalarTrace::from_values(cat);

            let (na, nb) = (a.len() as f64, b.len() as f64);
            let weighted = (na * ta.ergodic_average().unwrap()
                + nb * tb.ergodic_average().unwrap())
                / (na + nb);
            let got = tcat.ergodic_average().unwrap();
            let scale = got.abs().max(weighted.abs()).max(1.0);
            prop_assert!((got - weighted).abs() <= 1e-12 * scale);
        }

        #[test]
        fn ergodic_average_permutation_invariant(
            mut xs in proptest::collection::vec(-1e6f64..1e6, 1..512),
            seed in any::<u64>(),
        ) {
            let before = ScalarTrace::from_values(xs.clone()).ergodic_average().unwrap();
            // deterministic shuffle
            let mut state = seed | 1;
            for i in (1..xs.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                xs.swap(i, j);
            }
            let after = ScalarTrace::from_values(xs).ergodic_average().unwrap();
            let scale = before.abs().max(after.abs()).max(1.0);
            prop_assert!((before - after).abs() <= 1e-12 * scale);
        }

        #[test]
        fn retain_then_pool_matches_manual(
            len in 2usize..64,
            m in 2usize..5,
            seed in any::<u64>(),
        ) {
            let mut state = seed | 1;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64) / ((1u64 << 53) as f64) * 10.0 - 5.0
            };
            let chains: Vec<ScalarTrace> = (0..m)
                .map(|_| ScalarTrace::from_values((0..len).map(|_| next()).collect()))
                .collect();
            let multi = MultiChainTrace::new(chains.clone()).unwrap();
            let got = multi.retain_last_half().unwrap().pooled_mean().unwrap();

            let keep = len / 2;
            let manual_chains: Vec<ScalarTrace> = chains
                .iter()
                .map(|c| ScalarTrace::from_values(c.values()[len - keep..].to_vec()))
                .collect();
            let manual = MultiChainTrace::new(manual_chains).unwrap().pooled_mean().unwrap();
            prop_assert_eq!(got, manual);
        }
    }
}
