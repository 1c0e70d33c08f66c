//! MCMC output analysis: Monte Carlo standard errors via consistent batch
//! means, the Gelman-Rubin diagnostic with its 97.5% upper bound, and the
//! sequential stopping rules built on both, together with the samplers and
//! replication harness used to compare them.
//!
//! The crate is organized around a small data model ([`ScalarTrace`] for one
//! chain's draws of a functional, [`MultiChainTrace`] for parallel chains)
//! and pure estimator functions that consume it. Everything downstream of a
//! random seed is reproducible: the same `(seed, stream_id)` pair always
//! yields the same draws, and replication studies assign streams by
//! replication id so results are independent of the worker count.

pub mod batch_means;
pub mod csv_io;
pub mod dist;
mod error;
pub mod gelman_rubin;
pub mod harness;
pub mod models;
pub mod rng;
pub mod stopping;
pub mod traces;

pub use batch_means::{CbmEstimate, CbmOptions};
pub use error::Error;
pub use gelman_rubin::PsrfReport;
pub use rng::RngStream;
pub use stopping::{FixedWidthRule, GrdRule, Growth, StopDecision};
pub use traces::{EstimateWithError, MultiChainTrace, ScalarTrace};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
