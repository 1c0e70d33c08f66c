//! Replication study on the geostatistical model: a pilot run that fixes
//! "truth" and starting percentiles, then a multi-chain arm stopped by the
//! R-hat upper bound and a single-chain arm stopped by per-parameter
//! half-width cutoffs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::incremental::PrefixTrace;
use super::{run_replications, DecisionRecord, ReplicationResult, StudyOutput, DEFAULT_CAP};
use crate::batch_means::{cbm_variance, CbmOptions};
use crate::models::geo::{GeoChain, GeoData, GeoState, Sigma2Update, GEO_PARAM_NAMES};
use crate::rng::{replication_stream, RngStream, PILOT_STREAM};
use crate::stopping::{grd_check, next_check_size, FixedWidthRule, GrdRule, Growth};
use crate::traces::{MultiChainTrace, ScalarTrace};
use crate::{Error, Result};

/// Percentile levels recorded by the pilot, used as starting values.
pub const START_PERCENTILES: [f64; 4] = [0.10, 0.30, 0.70, 0.90];

/// Pilot-run configuration: one long chain whose posterior means become
/// the study's truth.
#[derive(Debug, Clone)]
pub struct GeoPilotConfig {
    pub iterations: usize,
    pub seed: u64,
    pub start: GeoState,
    pub proposal_var: f64,
    pub sigma2_update: Sigma2Update,
}

/// What the pilot persists: per-parameter posterior means with their CBM
/// standard errors (the assumed truth) and the four starting percentiles
/// per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotArtifact {
    pub seed: u64,
    pub iterations: usize,
    pub names: Vec<String>,
    pub truth: Vec<f64>,
    pub truth_mcse: Vec<f64>,
    pub percentile_levels: Vec<f64>,
    /// starts[j] is the state assembled from the j-th percentile of every
    /// parameter.
    pub starts: Vec<Vec<f64>>,
}

impl PilotArtifact {
    pub fn start_state(&self, index: usize) -> GeoState {
        let s = &self.starts[index];
        GeoState {
            tau2: s[0],
            sigma2: s[1],
            phi: s[2],
            beta: s[3],
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("pilot serialization: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("pilot artifact: {e}")))
    }
}

fn percentile(sorted: &[f64], level: f64) -> f64 {
    // nearest-rank on the sorted draws
    let n = sorted.len();
    let idx = ((level * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

/// Runs the pilot chain and extracts truth values, their standard errors,
/// and the starting percentiles.
pub fn run_geo_pilot(data: &GeoData, config: &GeoPilotConfig) -> Result<PilotArtifact> {
    let stream = RngStream::new(config.seed, PILOT_STREAM);
    let mut chain = GeoChain::new(
        data,
        config.start,
        stream,
        config.proposal_var,
        config.sigma2_update,
    )?;
    let mut traces: [ScalarTrace; 4] =
        std::array::from_fn(|_| ScalarTrace::with_capacity(config.iterations));
    for _ in 0..config.iterations {
        let state = chain.step().state;
        for (trace, value) in traces.iter_mut().zip(state.as_array()) {
            trace.push(value);
        }
    }

    let opts = CbmOptions::default();
    let mut truth = Vec::with_capacity(4);
    let mut truth_mcse = Vec::with_capacity(4);
    let mut starts = vec![Vec::with_capacity(4); START_PERCENTILES.len()];
    for trace in &traces {
        let est = cbm_variance(trace, &opts)?;
        truth.push(est.point);
        truth_mcse.push(est.mcse);
        let mut sorted = trace.values().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (j, &level) in START_PERCENTILES.iter().enumerate() {
            starts[j].push(percentile(&sorted, level));
        }
    }

    Ok(PilotArtifact {
        seed: config.seed,
        iterations: config.iterations,
        names: GEO_PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
        truth,
        truth_mcse,
        percentile_levels: START_PERCENTILES.to_vec(),
        starts,
    })
}

/// Multi-chain arm configuration.
#[derive(Debug, Clone)]
pub struct GeoGrdConfig {
    pub rule: GrdRule,
    pub replications: usize,
    pub seed: u64,
    pub cap: u64,
    pub proposal_var: f64,
    pub sigma2_update: Sigma2Update,
    pub collect_decisions: bool,
}

impl GeoGrdConfig {
    pub fn new(replications: usize, seed: u64) -> Self {
        Self {
            rule: GrdRule {
                delta: 1.1,
                m: START_PERCENTILES.len(),
                n_star: 1000,
                growth: Growth::Relative(0.10),
                discard_first_half: false,
            },
            replications,
            seed,
            cap: DEFAULT_CAP,
            proposal_var: crate::models::geo::DEFAULT_PROPOSAL_VAR,
            sigma2_update: Sigma2Update::Slice,
            collect_decisions: false,
        }
    }
}

/// Runs the multi-chain arm: each replication starts its chains at the
/// pilot percentiles, uses no burn-in, and stops when the R-hat upper
/// bound is below delta for all four parameters. Estimates average over
/// all draws of all chains.
pub fn run_geo_grd(
    data: &GeoData,
    pilot: &PilotArtifact,
    config: &GeoGrdConfig,
) -> Result<StudyOutput> {
    config.rule.validate()?;
    if config.rule.m != pilot.starts.len() {
        return Err(Error::Config(format!(
            "rule wants {} chains but pilot provides {} starts",
            config.rule.m,
            pilot.starts.len()
        )));
    }
    let rule = &config.rule;
    let per_chain_min = (rule.n_star as usize).div_ceil(rule.m) as u64;

    let worker = |rep: usize| -> Result<(ReplicationResult, Vec<DecisionRecord>)> {
        let mut chains: Vec<(GeoChain, [ScalarTrace; 4])> = (0..rule.m)
            .map(|c| {
                let stream = RngStream::new(config.seed, replication_stream(rep, c));
                let chain = GeoChain::new(
                    data,
                    pilot.start_state(c),
                    stream,
                    config.proposal_var,
                    config.sigma2_update,
                )?;
                Ok((
                    chain,
                    std::array::from_fn(|_| ScalarTrace::with_capacity(per_chain_min as usize)),
                ))
            })
            .collect::<Result<_>>()?;

        let mut decisions = Vec::new();
        let mut per_chain = per_chain_min;
        loop {
            for (chain, traces) in chains.iter_mut() {
                while (traces[0].len() as u64) < per_chain {
                    let state = chain.step().state;
                    for (trace, value) in traces.iter_mut().zip(state.as_array()) {
                        trace.push(value);
                    }
                }
            }
            let multis: Vec<MultiChainTrace> = (0..4)
                .map(|p| {
                    MultiChainTrace::new(chains.iter().map(|c| c.1[p].clone()).collect())
                })
                .collect::<Result<_>>()?;
            let labelled: Vec<(&str, &MultiChainTrace)> = GEO_PARAM_NAMES
                .iter()
                .zip(&multis)
                .map(|(name, multi)| (*name, multi))
                .collect();
            let decision = grd_check(&labelled, rule)?;
            if config.collect_decisions {
                decisions.push(DecisionRecord {
                    rep_id: rep,
                    n: decision.n_at_decision,
                    criteria: decision.per_functional.iter().map(|f| f.criterion).collect(),
                });
            }
            let next = next_check_size(per_chain, &rule.growth);
            let failed = !decision.stop && next * rule.m as u64 > config.cap;
            if decision.stop || failed {
                let estimates = multis
                    .iter()
                    .map(|m| m.pooled_mean())
                    .collect::<Result<Vec<f64>>>()?;
                return Ok((
                    ReplicationResult {
                        rep_id: rep,
                        n_total: decision.n_at_decision,
                        stopped_at_minimum: decision.stop
                            && decision.n_at_decision == rule.n_star,
                        failed,
                        estimates,
                        criteria: decision
                            .per_functional
                            .iter()
                            .map(|f| f.criterion)
                            .collect(),
                        full_chain_estimates: None,
                    },
                    decisions,
                ));
            }
            per_chain = next;
        }
    };

    collect_study(config.replications, config.collect_decisions, worker)
}

/// Single-chain arm configuration.
#[derive(Debug, Clone)]
pub struct GeoCbmConfig {
    pub rule: FixedWidthRule,
    pub replications: usize,
    pub seed: u64,
    pub cap: u64,
    pub proposal_var: f64,
    pub sigma2_update: Sigma2Update,
    pub collect_decisions: bool,
}

impl GeoCbmConfig {
    pub fn new(replications: usize, seed: u64) -> Self {
        Self {
            rule: FixedWidthRule {
                epsilons: vec![0.5, 0.5, 0.05, 0.05],
                n_star: 1000,
                confidence: 0.95,
                // the variance components mix slowly here (hundreds of
                // sweeps per effective draw), so batches must grow faster
                // than sqrt(n) for the variance estimate to be honest at
                // the stop
                theta: 0.7,
                growth: Growth::Absolute(10),
            },
            replications,
            seed,
            cap: DEFAULT_CAP,
            proposal_var: crate::models::geo::DEFAULT_PROPOSAL_VAR,
            sigma2_update: Sigma2Update::Slice,
            collect_decisions: false,
        }
    }
}

/// Runs the single-chain arm: replications cycle through the four pilot
/// percentile starts in equal blocks and stop when every parameter's
/// half-width is below its cutoff. The recorded criteria are the
/// half-widths at the stop, so interval coverage can be assessed
/// downstream.
///
/// Checks are frequent (the growth step is small) and the runs are long,
/// so the half-widths come from the prefix-sum checker rather than a full
/// rescan of the traces at every check.
pub fn run_geo_cbm(
    data: &GeoData,
    pilot: &PilotArtifact,
    config: &GeoCbmConfig,
) -> Result<StudyOutput> {
    config.rule.validate()?;
    if config.rule.epsilons.len() != 4 {
        return Err(Error::FunctionalCountMismatch {
            context: "geo fixed-width rule",
            expected: 4,
            got: config.rule.epsilons.len(),
        });
    }
    let rule = &config.rule;
    let starts = pilot.starts.len();

    let worker = |rep: usize| -> Result<(ReplicationResult, Vec<DecisionRecord>)> {
        // equal blocks per starting percentile: reps 0..R/4 from the 10th,
        // the next block from the 30th, and so on
        let start_idx = (rep * starts / config.replications).min(starts - 1);
        let stream = RngStream::new(config.seed, replication_stream(rep, 0));
        let mut chain = GeoChain::new(
            data,
            pilot.start_state(start_idx),
            stream,
            config.proposal_var,
            config.sigma2_update,
        )?;
        let mut traces: [ScalarTrace; 4] =
            std::array::from_fn(|_| ScalarTrace::with_capacity(rule.n_star as usize));
        let mut prefixes: [PrefixTrace; 4] =
            std::array::from_fn(|_| PrefixTrace::new(rule.n_star as usize));
        let mut decisions = Vec::new();
        let mut target = rule.n_star;
        loop {
            while (traces[0].len() as u64) < target {
                let state = chain.step().state;
                for ((trace, prefix), value) in
                    traces.iter_mut().zip(prefixes.iter_mut()).zip(state.as_array())
                {
                    trace.push(value);
                    prefix.push(value);
                }
            }
            let n = traces[0].len() as u64;
            let padding_active = n < rule.n_star;
            let mut criteria = Vec::with_capacity(4);
            let mut stop = true;
            for (prefix, &eps) in prefixes.iter().zip(&rule.epsilons) {
                let hw = prefix.half_width(rule.theta, rule.confidence)?;
                let criterion = hw + if padding_active { eps } else { 0.0 };
                stop &= criterion <= eps;
                criteria.push(criterion);
            }
            if config.collect_decisions {
                decisions.push(DecisionRecord {
                    rep_id: rep,
                    n,
                    criteria: criteria.clone(),
                });
            }
            let next = next_check_size(target, &rule.growth);
            let failed = !stop && next > config.cap;
            if stop || failed {
                let estimates = traces
                    .iter()
                    .map(|t| t.ergodic_average())
                    .collect::<Result<Vec<f64>>>()?;
                return Ok((
                    ReplicationResult {
                        rep_id: rep,
                        n_total: n,
                        stopped_at_minimum: stop && target == rule.n_star,
                        failed,
                        estimates,
                        criteria,
                        full_chain_estimates: None,
                    },
                    decisions,
                ));
            }
            target = next;
        }
    };

    collect_study(config.replications, config.collect_decisions, worker)
}

fn collect_study<F>(reps: usize, collect_decisions: bool, worker: F) -> Result<StudyOutput>
where
    F: Fn(usize) -> Result<(ReplicationResult, Vec<DecisionRecord>)> + Sync + Send,
{
    let raw = run_replications(reps, worker);
    let mut results = Vec::with_capacity(reps);
    let mut decisions = Vec::new();
    for item in raw {
        let (result, decs) = item?;
        results.push(result);
        decisions.extend(decs);
    }
    Ok(StudyOutput {
        functionals: GEO_PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
        results,
        decisions: collect_decisions.then_some(decisions),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::geo::{synth_geo_data, Region};
    use crate::rng::SYNTH_STREAM;

    fn small_setup() -> (GeoData, PilotArtifact) {
        let truth = GeoState {
            tau2: 1.5,
            sigma2: 2.0,
            phi: 1.5,
            beta: 4.0,
        };
        let region = Region {
            x_min: 0.0,
            x_max: 10.0,
            y_min: 0.0,
            y_max: 10.0,
        };
        let mut stream = RngStream::new(88, SYNTH_STREAM);
        let data = synth_geo_data(&mut stream, 12, &truth, &region).unwrap();
        let pilot = run_geo_pilot(
            &data,
            &GeoPilotConfig {
                iterations: 4_000,
                seed: 88,
                start: truth,
                proposal_var: crate::models::geo::DEFAULT_PROPOSAL_VAR,
                sigma2_update: Sigma2Update::Slice,
            },
        )
        .unwrap();
        (data, pilot)
    }

    #[test]
    fn pilot_percentiles_ordered_and_reproducible() {
        let (data, pilot) = small_setup();
        for p in 0..4 {
            for j in 1..pilot.starts.len() {
                assert!(pilot.starts[j][p] >= pilot.starts[j - 1][p]);
            }
            assert!(pilot.truth_mcse[p] > 0.0);
        }
        let again = run_geo_pilot(
            &data,
            &GeoPilotConfig {
                iterations: 4_000,
                seed: 88,
                start: GeoState {
                    tau2: 1.5,
                    sigma2: 2.0,
                    phi: 1.5,
                    beta: 4.0,
                },
                proposal_var: crate::models::geo::DEFAULT_PROPOSAL_VAR,
                sigma2_update: Sigma2Update::Slice,
            },
        )
        .unwrap();
        assert_eq!(pilot, again);
    }

    #[test]
    fn pilot_artifact_round_trips_through_toml() {
        let (_, pilot) = small_setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pilot.toml");
        pilot.save(&path).unwrap();
        assert_eq!(PilotArtifact::load(&path).unwrap(), pilot);
    }

    #[test]
    fn grd_arm_runs_small() {
        let (data, pilot) = small_setup();
        let mut config = GeoGrdConfig::new(4, 52);
        config.rule.n_star = 200;
        config.cap = 100_000;
        let out = run_geo_grd(&data, &pilot, &config).unwrap();
        assert_eq!(out.results.len(), 4);
        for r in &out.results {
            assert!(r.n_total >= 200);
            assert_eq!(r.estimates.len(), 4);
            if !r.failed {
                assert!(r.criteria.iter().all(|&c| c <= config.rule.delta));
            }
        }
    }

    #[test]
    fn cbm_arm_runs_small_with_loose_cutoffs() {
        let (data, pilot) = small_setup();
        let mut config = GeoCbmConfig::new(4, 53);
        config.rule.epsilons = vec![3.0, 3.0, 1.5, 0.6];
        config.rule.n_star = 200;
        config.cap = 200_000;
        let out = run_geo_cbm(&data, &pilot, &config).unwrap();
        assert_eq!(out.results.len(), 4);
        for r in &out.results {
            assert!(!r.failed, "rep {} failed at n = {}", r.rep_id, r.n_total);
            assert_eq!(r.criteria.len(), 4);
        }
    }
}
