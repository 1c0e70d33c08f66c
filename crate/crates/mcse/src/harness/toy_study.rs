//! Replication studies on the conjugate toy model: a single-chain arm
//! stopped by the fixed-width rule and a parallel-chain arm stopped by the
//! R-hat upper bound rule.

use super::{run_replications, DecisionRecord, ReplicationResult, StudyOutput, DEFAULT_CAP};
use crate::models::toy::{toy_exact_draw, toy_gibbs_step, ToyData, ToyState};
use crate::rng::{replication_stream, RngStream, START_VALUE_STREAM};
use crate::stopping::{fixed_width_check, grd_check, next_check_size, FixedWidthRule, GrdRule};
use crate::traces::{MultiChainTrace, ScalarTrace};
use crate::Result;

pub const TOY_FUNCTIONALS: [&str; 2] = ["mu", "lambda"];

/// Single-chain fixed-width study configuration.
#[derive(Debug, Clone)]
pub struct ToyCbmConfig {
    pub data: ToyData,
    pub rule: FixedWidthRule,
    pub replications: usize,
    pub seed: u64,
    pub cap: u64,
    pub collect_decisions: bool,
}

impl ToyCbmConfig {
    pub fn new(data: ToyData, epsilon: f64, replications: usize, seed: u64) -> Self {
        Self {
            data,
            rule: FixedWidthRule::new(vec![epsilon, epsilon], 400),
            replications,
            seed,
            cap: DEFAULT_CAP,
            collect_decisions: false,
        }
    }
}

/// Runs the fixed-width toy study: every replication starts the Gibbs
/// chain from mu = ybar, first checks at the rule minimum, and grows the
/// chain between checks until both half-widths fall below the cutoff.
/// Point estimates are ergodic averages over all draws.
pub fn run_toy_cbm(config: &ToyCbmConfig) -> Result<StudyOutput> {
    config.rule.validate()?;
    let rule = &config.rule;
    let data = &config.data;

    let worker = |rep: usize| -> Result<(ReplicationResult, Vec<DecisionRecord>)> {
        let mut stream = RngStream::new(config.seed, replication_stream(rep, 0));
        // the first conditional update only reads mu, so no initial lambda
        // is needed; the placeholder is never used
        let mut state = ToyState {
            mu: data.y_bar(),
            lambda: 1.0,
        };
        let mut mu = ScalarTrace::with_capacity(rule.n_star as usize);
        let mut lambda = ScalarTrace::with_capacity(rule.n_star as usize);
        let mut decisions = Vec::new();
        let mut target = rule.n_star;
        loop {
            while (mu.len() as u64) < target {
                state = toy_gibbs_step(&state, data, &mut stream);
                mu.push(state.mu);
                lambda.push(state.lambda);
            }
            let decision = fixed_width_check(
                &[(TOY_FUNCTIONALS[0], &mu), (TOY_FUNCTIONALS[1], &lambda)],
                rule,
            )?;
            if config.collect_decisions {
                decisions.push(DecisionRecord {
                    rep_id: rep,
                    n: decision.n_at_decision,
                    criteria: decision.per_functional.iter().map(|f| f.criterion).collect(),
                });
            }
            let next = next_check_size(target, &rule.growth);
            let failed = !decision.stop && next > config.cap;
            if decision.stop || failed {
                return Ok((
                    ReplicationResult {
                        rep_id: rep,
                        n_total: mu.len() as u64,
                        stopped_at_minimum: decision.stop && target == rule.n_star,
                        failed,
                        estimates: vec![mu.ergodic_average()?, lambda.ergodic_average()?],
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
            target = next;
        }
    };

    collect_study(config.replications, config.collect_decisions, worker)
}

/// Parallel-chain study configuration.
#[derive(Debug, Clone)]
pub struct ToyGrdConfig {
    pub data: ToyData,
    pub rule: GrdRule,
    pub replications: usize,
    pub seed: u64,
    pub cap: u64,
    pub collect_decisions: bool,
}

impl ToyGrdConfig {
    pub fn new(data: ToyData, delta: f64, chains: usize, replications: usize, seed: u64) -> Self {
        Self {
            data,
            rule: GrdRule::new(delta, chains, 400),
            replications,
            seed,
            cap: DEFAULT_CAP,
            collect_decisions: false,
        }
    }
}

/// Runs the multi-chain toy study. One set of starting states is drawn
/// from the exact posterior sampler on a dedicated stream and shared by
/// all replications, so every replication answers the same question with
/// fresh chain randomness. Chains grow by the rule's growth factor until
/// the R-hat upper bound drops below delta for both functionals.
///
/// Point estimates are pooled means of the retained halves when the rule
/// discards burn-in (the recomputation over entire chains is recorded
/// alongside), and of the entire chains otherwise.
pub fn run_toy_grd(config: &ToyGrdConfig) -> Result<StudyOutput> {
    config.rule.validate()?;
    let rule = &config.rule;
    let data = &config.data;

    let mut start_stream = RngStream::new(config.seed, START_VALUE_STREAM);
    let starts: Vec<ToyState> = (0..rule.m)
        .map(|_| toy_exact_draw(data, &mut start_stream))
        .collect();

    let per_chain_min = (rule.n_star as usize).div_ceil(rule.m) as u64;

    let worker = |rep: usize| -> Result<(ReplicationResult, Vec<DecisionRecord>)> {
        let mut chains: Vec<(RngStream, ToyState, ScalarTrace, ScalarTrace)> = starts
            .iter()
            .enumerate()
            .map(|(c, start)| {
                (
                    RngStream::new(config.seed, replication_stream(rep, c)),
                    *start,
                    ScalarTrace::with_capacity(per_chain_min as usize),
                    ScalarTrace::with_capacity(per_chain_min as usize),
                )
            })
            .collect();

        let mut decisions = Vec::new();
        let mut per_chain = per_chain_min;
        loop {
            for (stream, state, mu, lambda) in chains.iter_mut() {
                while (mu.len() as u64) < per_chain {
                    *state = toy_gibbs_step(state, data, stream);
                    mu.push(state.mu);
                    lambda.push(state.lambda);
                }
            }
            let mu_multi =
                MultiChainTrace::new(chains.iter().map(|c| c.2.clone()).collect())?;
            let lambda_multi =
                MultiChainTrace::new(chains.iter().map(|c| c.3.clone()).collect())?;
            let decision = grd_check(
                &[
                    (TOY_FUNCTIONALS[0], &mu_multi),
                    (TOY_FUNCTIONALS[1], &lambda_multi),
                ],
                rule,
            )?;
            if config.collect_decisions {
                decisions.push(DecisionRecord {
                    rep_id: rep,
                    n: decision.n_at_decision,
                    criteria: decision.per_functional.iter().map(|f| f.criterion).collect(),
                });
            }
            let n_total = decision.n_at_decision;
            let next = next_check_size(per_chain, &rule.growth);
            let failed = !decision.stop && next * rule.m as u64 > config.cap;
            if decision.stop || failed {
                let full = vec![mu_multi.pooled_mean()?, lambda_multi.pooled_mean()?];
                let (estimates, full_chain_estimates) = if rule.discard_first_half {
                    let retained_mu = mu_multi.retain_last_half()?.pooled_mean()?;
                    let retained_lambda = lambda_multi.retain_last_half()?.pooled_mean()?;
                    (vec![retained_mu, retained_lambda], Some(full))
                } else {
                    (full, None)
                };
                return Ok((
                    ReplicationResult {
                        rep_id: rep,
                        n_total,
                        stopped_at_minimum: decision.stop && n_total == rule.n_star,
                        failed,
                        estimates,
                        criteria: decision
                            .per_functional
                            .iter()
                            .map(|f| f.criterion)
                            .collect(),
                        full_chain_estimates,
                    },
                    decisions,
                ));
            }
            per_chain = next;
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
        functionals: TOY_FUNCTIONALS.iter().map(|s| s.to_string()).collect(),
        results,
        decisions: collect_decisions.then_some(decisions),
    })
}
