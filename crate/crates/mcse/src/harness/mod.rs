//! Replication-study engine: runs many independent replications of a
//! sampler under a stopping rule, collects per-replication records, and
//! summarizes them against known truth.
//!
//! Replications are embarrassingly parallel. Each is driven entirely by
//! its own RNG stream, chosen from the replication id, so the study output
//! is a pure function of the master seed no matter how many workers run it.

mod geo_study;
mod incremental;
mod persist;
mod summary;
mod toy_study;

pub use geo_study::{
    run_geo_cbm, run_geo_grd, run_geo_pilot, GeoCbmConfig, GeoGrdConfig, GeoPilotConfig,
    PilotArtifact,
};
pub use persist::{
    read_replications_csv, write_decisions_csv, write_histogram_csv, write_replications_csv,
    write_summary_csv,
};
pub use summary::{emit_histogram, estimate_iqr, summarize, Histogram, SummaryRow, SummaryTable};
pub use toy_study::{run_toy_cbm, run_toy_grd, ToyCbmConfig, ToyGrdConfig};

/// Default cap on total draws per replication before it is declared failed.
pub const DEFAULT_CAP: u64 = 10_000_000;

/// One replication's record: where it stopped, what it estimated, and the
/// criterion values at the stop.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub rep_id: usize,
    /// Total draws simulated, summed over chains, including any halves the
    /// diagnostic later discards.
    pub n_total: u64,
    /// Stopped at the rule's minimum effort.
    pub stopped_at_minimum: bool,
    /// Hit the draw cap without satisfying the rule; excluded from
    /// summaries but always counted.
    pub failed: bool,
    /// Point estimate per functional.
    pub estimates: Vec<f64>,
    /// Criterion value per functional at the stop: the confidence
    /// half-width for fixed-width runs, the R-hat upper bound for
    /// multi-chain runs.
    pub criteria: Vec<f64>,
    /// For multi-chain runs that discard burn-in: the estimates recomputed
    /// over the entire chains.
    pub full_chain_estimates: Option<Vec<f64>>,
}

/// One stopping check, for decision logging.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub rep_id: usize,
    pub n: u64,
    pub criteria: Vec<f64>,
}

/// A study's raw output: per-replication results in replication order,
/// plus the decision log when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub functionals: Vec<String>,
    pub results: Vec<ReplicationResult>,
    pub decisions: Option<Vec<DecisionRecord>>,
}

impl StudyOutput {
    pub fn failed_count(&self) -> usize {
        self.results.iter().filter(|r| r.failed).count()
    }
}

/// Runs `reps` independent replications, in parallel when the `parallel`
/// feature is enabled. Results come back indexed by replication id, so
/// the output is identical to the sequential order regardless of worker
/// scheduling.
#[cfg(feature = "parallel")]
pub fn run_replications<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..reps).into_par_iter().map(f).collect()
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn run_replications<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    run_replications_seq(reps, f)
}

/// Always-sequential replication driver; the benchmark baseline.
pub fn run_replications_seq<T, F>(reps: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..reps).map(f).collect()
}

/// Runs `f` inside a worker pool of the given size. With the `parallel`
/// feature disabled (or `workers` = 0) the pool size is irrelevant and `f`
/// runs on the current thread.
#[cfg(feature = "parallel")]
pub fn with_worker_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool")
        .install(f)
}

#[cfg(not(feature = "parallel"))]
pub fn with_worker_pool<R: Send>(_workers: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replications_come_back_in_order() {
        let out = run_replications(100, |r| r * 2);
        assert_eq!(out, (0..100).map(|r| r * 2).collect::<Vec<_>>());
        let seq = run_replications_seq(100, |r| r * 2);
        assert_eq!(out, seq);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn worker_pool_size_does_not_change_results() {
        let one = with_worker_pool(1, || run_replications(64, |r| r as u64 * 3));
        let four = with_worker_pool(4, || run_replications(64, |r| r as u64 * 3));
        assert_eq!(one, four);
    }
}
