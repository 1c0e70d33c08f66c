//! Target models and their MCMC samplers: a conjugate normal toy model
//! with closed-form posterior means (so estimator error can be measured
//! exactly) and a hierarchical geostatistical model fit by
//! Metropolis-within-Gibbs.

pub mod geo;
pub mod slice;
pub mod toy;
