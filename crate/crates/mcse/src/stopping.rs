//! Sequential stopping controllers: the fixed-width rule (stop when every
//! half-width, plus a minimum-effort padding, drops below its cutoff) and
//! the multi-chain diagnostic rule (stop when every R-hat upper bound drops
//! below delta), with the growth schedule used between checks.

use serde::{Deserialize, Serialize};

use crate::batch_means::{cbm_variance, CbmOptions};
use crate::gelman_rubin::psrf;
use crate::traces::{MultiChainTrace, ScalarTrace};
use crate::{Error, Result};

/// How the simulation size grows between stopping checks: by a relative
/// rate (e.g. +10%) or by an absolute number of draws (e.g. +10).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Relative(f64),
    Absolute(u64),
}

impl Growth {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Growth::Relative(r) if r > 0.0 && r.is_finite() => Ok(()),
            Growth::Absolute(k) if k >= 1 => Ok(()),
            Growth::Relative(r) => Err(Error::InvalidParameter {
                name: "growth",
                value: r,
                reason: "relative growth must be positive",
            }),
            Growth::Absolute(k) => Err(Error::InvalidParameter {
                name: "growth",
                value: k as f64,
                reason: "absolute growth must be at least 1",
            }),
        }
    }
}

/// Next check size from the current one; strictly increasing so any bound
/// is reached in finitely many steps.
pub fn next_check_size(current: u64, growth: &Growth) -> u64 {
    match *growth {
        Growth::Relative(rate) => {
            let grown = (current as f64 * (1.0 + rate)).floor() as u64;
            grown.max(current + 1)
        }
        Growth::Absolute(step) => current + step.max(1),
    }
}

/// Fixed-width stopping rule: per-functional half-width cutoffs, a minimum
/// effort before stopping is allowed, and the CBM settings used for the
/// half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedWidthRule {
    /// Half-width cutoffs, one per functional, all positive.
    pub epsilons: Vec<f64>,
    /// Minimum draws before the padding term vanishes.
    pub n_star: u64,
    /// Confidence level of the half-widths.
    pub confidence: f64,
    /// CBM batch exponent.
    pub theta: f64,
    /// Growth between checks.
    pub growth: Growth,
}

impl FixedWidthRule {
    pub fn new(epsilons: Vec<f64>, n_star: u64) -> Self {
        Self {
            epsilons,
            n_star,
            confidence: 0.95,
            theta: 0.5,
            growth: Growth::Relative(0.10),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &e in &self.epsilons {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    value: e,
                    reason: "cutoffs must be positive",
                });
            }
        }
        if self.n_star < 4 {
            return Err(Error::InvalidParameter {
                name: "n_star",
                value: self.n_star as f64,
                reason: "minimum effort must be at least 4",
            });
        }
        self.growth.validate()
    }
}

/// Multi-chain stopping rule built on the R-hat upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrdRule {
    /// Cutoff delta > 1.
    pub delta: f64,
    /// Chain count.
    pub m: usize,
    /// Minimum TOTAL draws across chains, counting any halves that the
    /// diagnostic later discards.
    pub n_star: u64,
    /// Per-chain growth between checks.
    pub growth: Growth,
    /// Whether the diagnostic is computed on the last half of each chain.
    pub discard_first_half: bool,
}

impl GrdRule {
    pub fn new(delta: f64, m: usize, n_star: u64) -> Self {
        Self {
            delta,
            m,
            n_star,
            growth: Growth::Relative(0.10),
            discard_first_half: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 1.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: self.delta,
                reason: "cutoff must exceed 1",
            });
        }
        if self.m < 2 {
            return Err(Error::TooFewChains {
                need: 2,
                got: self.m,
            });
        }
        self.growth.validate()
    }
}

/// One functional's criterion value against its threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalCriterion {
    pub name: String,
    pub criterion: f64,
    pub threshold: f64,
}

/// Outcome of one stopping check. `stop` is true exactly when every
/// functional's criterion meets its threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct StopDecision {
    pub stop: bool,
    pub per_functional: Vec<FunctionalCriterion>,
    pub n_at_decision: u64,
    pub warnings: Vec<String>,
}

/// Evaluates the fixed-width criterion for every functional: half-width
/// plus the padding epsilon while n is below the minimum effort. Stopping
/// before the minimum therefore requires an exactly zero half-width.
pub fn fixed_width_check(
    traces: &[(&str, &ScalarTrace)],
    rule: &FixedWidthRule,
) -> Result<StopDecision> {
    rule.validate()?;
    if traces.len() != rule.epsilons.len() {
        return Err(Error::FunctionalCountMismatch {
            context: "fixed_width_check",
            expected: rule.epsilons.len(),
            got: traces.len(),
        });
    }
    let n = traces[0].1.len();
    for (_, t) in traces {
        if t.len() != n {
            return Err(Error::UnequalChainLengths {
                first: n,
                other: t.len(),
            });
        }
    }

    let opts = CbmOptions {
        theta: rule.theta,
        confidence: rule.confidence,
    };
    let padding_active = (n as u64) < rule.n_star;
    let mut per_functional = Vec::with_capacity(traces.len());
    let mut stop = true;
    for ((name, trace), &eps) in traces.iter().zip(&rule.epsilons) {
        let est = cbm_variance(trace, &opts)?;
        let criterion = est.half_width + if padding_active { eps } else { 0.0 };
        stop &= criterion <= eps;
        per_functional.push(FunctionalCriterion {
            name: (*name).to_string(),
            criterion,
            threshold: eps,
        });
    }

    Ok(StopDecision {
        stop,
        per_functional,
        n_at_decision: n as u64,
        warnings: Vec::new(),
    })
}

/// Evaluates the R-hat-upper-bound criterion for every functional on the
/// working set (last halves when the rule discards burn-in). A degenerate
/// within-chain variance yields an infinite criterion and a warning: a
/// constant chain must never fake convergence.
pub fn grd_check(
    multis: &[(&str, &MultiChainTrace)],
    rule: &GrdRule,
) -> Result<StopDecision> {
    rule.validate()?;
    if multis.is_empty() {
        return Err(Error::FunctionalCountMismatch {
            context: "grd_check",
            expected: 1,
            got: 0,
        });
    }
    let per_chain = multis[0].1.per_chain_length();
    for (_, m) in multis {
        if m.chain_count() != rule.m {
            return Err(Error::TooFewChains {
                need: rule.m,
                got: m.chain_count(),
            });
        }
        if m.per_chain_length() != per_chain {
            return Err(Error::UnequalChainLengths {
                first: per_chain,
                other: m.per_chain_length(),
            });
        }
    }

    // total effort counts every simulated draw, discarded halves included
    let n_total = (rule.m * per_chain) as u64;
    let padding = if n_total < rule.n_star { rule.delta } else { 0.0 };

    let mut per_functional = Vec::with_capacity(multis.len());
    let mut warnings = Vec::new();
    let mut stop = true;
    for (name, multi) in multis {
        let working;
        let working_ref = if rule.discard_first_half {
            working = multi.retain_last_half()?;
            &working
        } else {
            *multi
        };
        let criterion = match psrf(working_ref) {
            Ok(report) => report.r_upper + padding,
            Err(Error::DegenerateWithinVariance) => {
                warnings.push(format!(
                    "functional {name}: degenerate within-chain variance; continuing"
                ));
                f64::INFINITY
            }
            Err(e) => return Err(e),
        };
        stop &= criterion <= rule.delta;
        per_functional.push(FunctionalCriterion {
            name: (*name).to_string(),
            criterion,
            threshold: rule.delta,
        });
    }

    Ok(StopDecision {
        stop,
        per_functional,
        n_at_decision: n_total,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn growth_examples() {
        assert_eq!(next_check_size(400, &Growth::Relative(0.10)), 440);
        assert_eq!(next_check_size(9, &Growth::Relative(0.10)), 10);
        assert_eq!(next_check_size(1000, &Growth::Relative(0.10)), 1100);
        assert_eq!(next_check_size(1000, &Growth::Absolute(10)), 1010);
    }

    fn noisy_trace(n: usize, seed: u64) -> ScalarTrace {
        let mut s = crate::rng::RngStream::new(seed, 0);
        ScalarTrace::from_values(
            (0..n)
                .map(|_| crate::dist::draw_normal(&mut s, 0.0, 1.0).unwrap())
                .collect(),
        )
    }

    #[test]
    fn padding_blocks_stop_before_minimum() {
        let t = noisy_trace(399, 12);
        let rule = FixedWidthRule::new(vec![10.0], 400);
        let d = fixed_width_check(&[("g", &t)], &rule).unwrap();
        assert!(!d.stop);
        assert!(d.per_functional[0].criterion > 10.0);
    }

    #[test]
    fn constant_traces_stop_at_minimum() {
        let t = ScalarTrace::from_values(vec![1.0; 400]);
        let rule = FixedWidthRule::new(vec![0.04], 400);
        let d = fixed_width_check(&[("g", &t)], &rule).unwrap();
        assert!(d.stop);
        assert_eq!(d.per_functional[0].criterion, 0.0);
    }

    #[test]
    fn stop_requires_every_functional() {
        let tight = ScalarTrace::from_values(vec![1.0; 400]);
        let loose = noisy_trace(400, 5);
        let rule = FixedWidthRule::new(vec![0.04, 0.04], 400);
        let d = fixed_width_check(&[("mu", &tight), ("lambda", &loose)], &rule).unwrap();
        assert!(!d.stop);
        assert!(d.per_functional[0].criterion <= 0.04);
        assert!(d.per_functional[1].criterion > 0.04);
    }

    #[test]
    fn unequal_lengths_rejected() {
        let a = noisy_trace(400, 1);
        let b = noisy_trace(401, 2);
        let rule = FixedWidthRule::new(vec![0.1, 0.1], 400);
        assert!(fixed_width_check(&[("a", &a), ("b", &b)], &rule).is_err());
    }

    fn multi_of(seed: u64, m: usize, per_chain: usize) -> MultiChainTrace {
        let mut s = crate::rng::RngStream::new(seed, 0);
        MultiChainTrace::new(
            (0..m)
                .map(|_| {
                    ScalarTrace::from_values(
                        (0..per_chain)
                            .map(|_| crate::dist::draw_normal(&mut s, 0.0, 1.0).unwrap())
                            .collect(),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn grd_padding_blocks_before_minimum() {
        // 2 chains of 100 draws: total 200 < 400
        let multi = multi_of(7, 2, 100);
        let rule = GrdRule::new(1.1, 2, 400);
        let d = grd_check(&[("g", &multi)], &rule).unwrap();
        assert!(!d.stop);
        assert_eq!(d.n_at_decision, 200);
    }

    #[test]
    fn grd_identical_chains_stop_at_minimum() {
        let c = noisy_trace(200, 77);
        let multi = MultiChainTrace::new(vec![c.clone(), c]).unwrap();
        let rule = GrdRule::new(1.1, 2, 400);
        let d = grd_check(&[("g", &multi)], &rule).unwrap();
        assert!(d.stop);
        assert!(d.per_functional[0].criterion < 1.0);
    }

    #[test]
    fn grd_degenerate_variance_continues_with_warning() {
        let multi = MultiChainTrace::new(vec![
            ScalarTrace::from_values(vec![1.0; 300]),
            ScalarTrace::from_values(vec![1.0; 300]),
        ])
        .unwrap();
        let rule = GrdRule::new(1.1, 2, 400);
        let d = grd_check(&[("g", &multi)], &rule).unwrap();
        assert!(!d.stop);
        assert!(d.per_functional[0].criterion.is_infinite());
        assert_eq!(d.warnings.len(), 1);
    }

    #[test]
    fn grd_effort_counts_discarded_halves() {
        let multi = multi_of(3, 4, 100);
        let rule = GrdRule::new(1.1, 4, 400);
        let d = grd_check(&[("g", &multi)], &rule).unwrap();
        assert_eq!(d.n_at_decision, 400);
    }

    #[test]
    fn invalid_rules_rejected() {
        assert!(GrdRule::new(1.0, 2, 400).validate().is_err());
        assert!(GrdRule::new(1.1, 1, 400).validate().is_err());
        assert!(FixedWidthRule::new(vec![0.0], 400).validate().is_err());
        assert!(Growth::Relative(0.0).validate().is_err());
        assert!(Growth::Absolute(0).validate().is_err());
    }

    proptest! {
        #[test]
        fn schedule_strictly_increasing_and_reaches_bounds(
            start in 1u64..10_000,
            rate in 0.01f64..0.5,
            bound in 10_000u64..1_000_000,
        ) {
            let growth = Growth::Relative(rate);
            let mut n = start;
            let mut steps = 0;
            while n < bound {
                let next = next_check_size(n, &growth);
                prop_assert!(next > n);
                n = next;
                steps += 1;
                prop_assert!(steps < 10_000_000);
            }
        }
    }
}
