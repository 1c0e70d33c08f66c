//! Hierarchical geostatistical model: responses Z(s) = X(s) beta + xi(s)
//! with a spatially correlated error field, xi ~ N(0, tau2 I + sigma2
//! H(phi)), exponential correlation H(phi)_ij = exp(-dist(s_i, s_j)/phi),
//! and priors tau2 ~ IG(2, 30), sigma2 ~ IG(0.1, 30), phi ~ LogUnif(0.6, 6),
//! flat beta.
//!
//! Sampling is Metropolis-within-Gibbs: a joint random-walk update of
//! (tau2, phi, beta) with independent normal proposals on the raw scale,
//! and a univariate update of sigma2 that leaves its full conditional
//! invariant. The sigma2 full conditional is not a named family here, so
//! the default move is a slice-sampling step (exact invariance, no
//! tuning); a random-walk move on log sigma2 is available as a fallback.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::dist::{draw_mvn, draw_normal, InverseGammaParams};
use crate::models::slice::slice_step;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Support of the log-uniform prior on the range parameter.
pub const PHI_SUPPORT: (f64, f64) = (0.6, 6.0);

/// Default per-component variance of the joint random-walk proposal.
pub const DEFAULT_PROPOSAL_VAR: f64 = 0.3;

pub fn tau2_prior() -> InverseGammaParams {
    InverseGammaParams::new(2.0, 30.0).expect("fixed prior")
}

pub fn sigma2_prior() -> InverseGammaParams {
    InverseGammaParams::new(0.1, 30.0).expect("fixed prior")
}

fn log_unif_log_density(phi: f64) -> f64 {
    let (a, b) = PHI_SUPPORT;
    if phi <= a || phi >= b {
        f64::NEG_INFINITY
    } else {
        -phi.ln() - (b / a).ln().ln()
    }
}

/// One spatial location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub x: f64,
    pub y: f64,
}

impl Site {
    pub fn distance(&self, other: &Site) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Observed data: N distinct sites, the covariate X (latitude per site),
/// and the response Z.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoData {
    sites: Vec<Site>,
    covariate: Vec<f64>,
    response: Vec<f64>,
}

impl GeoData {
    pub fn new(sites: Vec<Site>, covariate: Vec<f64>, response: Vec<f64>) -> Result<Self> {
        let n = sites.len();
        if n < 3 {
            return Err(Error::InvalidParameter {
                name: "sites",
                value: n as f64,
                reason: "need at least 3 sites",
            });
        }
        if covariate.len() != n || response.len() != n {
            return Err(Error::Config(format!(
                "covariate/response lengths {}/{} do not match {} sites",
                covariate.len(),
                response.len(),
                n
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if sites[i].distance(&sites[j]) == 0.0 {
                    return Err(Error::Config(format!("sites {i} and {j} coincide")));
                }
            }
        }
        Ok(Self {
            sites,
            covariate,
            response,
        })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn covariate(&self) -> &[f64] {
        &self.covariate
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }
}

/// Variance components and regression slope of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoState {
    pub tau2: f64,
    pub sigma2: f64,
    pub phi: f64,
    pub beta: f64,
}

impl GeoState {
    pub fn in_support(&self) -> bool {
        self.tau2 > 0.0
            && self.sigma2 > 0.0
            && self.phi > PHI_SUPPORT.0
            && self.phi < PHI_SUPPORT.1
            && self.beta.is_finite()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.tau2, self.sigma2, self.phi, self.beta]
    }
}

/// Names of the four estimated functionals, in storage order.
pub const GEO_PARAM_NAMES: [&str; 4] = ["tau2", "sigma2", "phi", "beta"];

/// Exponential correlation matrix: unit diagonal,
/// entries exp(-dist/phi) off it.
pub fn geo_correlation(sites: &[Site], phi: f64) -> DMatrix<f64> {
    correlation_from_distances(&distance_matrix(sites), phi)
}

fn distance_matrix(sites: &[Site]) -> DMatrix<f64> {
    let n = sites.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = sites[i].distance(&sites[j]);
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    d
}

fn correlation_from_distances(dist: &DMatrix<f64>, phi: f64) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(dist.nrows(), dist.ncols());
    correlation_from_distances_into(dist, phi, &mut h);
    h
}

fn correlation_from_distances_into(dist: &DMatrix<f64>, phi: f64, h: &mut DMatrix<f64>) {
    let n = dist.nrows();
    for i in 0..n {
        h[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let c = (-dist[(i, j)] / phi).exp();
            h[(i, j)] = c;
            h[(j, i)] = c;
        }
    }
}

fn covariance(state: &GeoState, corr: &DMatrix<f64>) -> DMatrix<f64> {
    let n = corr.nrows();
    let mut sigma = corr * state.sigma2;
    for i in 0..n {
        sigma[(i, i)] += state.tau2;
    }
    sigma
}

fn gaussian_log_density(resid: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let n = resid.len() as f64;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = resid.dot(&chol.solve(resid));
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
}

/// Log posterior given a correlation matrix already built at `state.phi`.
fn log_posterior_with_corr(state: &GeoState, data: &GeoData, corr: &DMatrix<f64>) -> f64 {
    if !state.in_support() {
        return f64::NEG_INFINITY;
    }
    let sigma = covariance(state, corr);
    let Some(chol) = sigma.cholesky() else {
        // numerically indefinite covariance; treat as rejected region
        return f64::NEG_INFINITY;
    };
    let resid = DVector::from_iterator(
        data.len(),
        data.response()
            .iter()
            .zip(data.covariate())
            .map(|(z, x)| z - x * state.beta),
    );
    gaussian_log_density(&resid, &chol)
        + tau2_prior().log_density(state.tau2)
        + sigma2_prior().log_density(state.sigma2)
        + log_unif_log_density(state.phi)
}

/// Reusable buffers for the chain's inner loop; every log-posterior
/// evaluation costs one Cholesky factorization, so the covariance and
/// solve buffers are recycled instead of reallocated.
#[derive(Debug, Clone)]
struct EvalScratch {
    sigma: DMatrix<f64>,
    resid: DVector<f64>,
    work: DVector<f64>,
}

impl EvalScratch {
    fn new(n: usize) -> Self {
        Self {
            sigma: DMatrix::zeros(n, n),
            resid: DVector::zeros(n),
            work: DVector::zeros(n),
        }
    }
}

/// Allocation-free log posterior used by the chain. Same arithmetic as
/// `log_posterior_with_corr`.
fn log_posterior_scratch(
    state: &GeoState,
    data: &GeoData,
    corr: &DMatrix<f64>,
    scratch: &mut EvalScratch,
) -> f64 {
    if !state.in_support() {
        return f64::NEG_INFINITY;
    }
    let n = data.len();
    scratch.sigma.copy_from(corr);
    scratch.sigma *= state.sigma2;
    for i in 0..n {
        scratch.sigma[(i, i)] += state.tau2;
    }
    let Some(chol) = Cholesky::new(std::mem::take(&mut scratch.sigma)) else {
        scratch.sigma = DMatrix::zeros(n, n);
        return f64::NEG_INFINITY;
    };
    for ((z, x), r) in data
        .response()
        .iter()
        .zip(data.covariate())
        .zip(scratch.resid.iter_mut())
    {
        *r = z - x * state.beta;
    }
    scratch.work.copy_from(&scratch.resid);
    chol.solve_mut(&mut scratch.work);
    let quad = scratch.resid.dot(&scratch.work);
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    scratch.sigma = chol.unpack_dirty();

    -0.5 * ((n as f64) * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
        + tau2_prior().log_density(state.tau2)
        + sigma2_prior().log_density(state.sigma2)
        + log_unif_log_density(state.phi)
}

/// Log posterior density of a state, up to a state-independent constant.
/// Out-of-support states evaluate to negative infinity.
pub fn geo_log_posterior(state: &GeoState, data: &GeoData) -> f64 {
    if !state.in_support() {
        return f64::NEG_INFINITY;
    }
    let corr = geo_correlation(data.sites(), state.phi);
    log_posterior_with_corr(state, data, &corr)
}

/// How sigma2 is updated inside each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Update {
    /// Slice-sampling step on the sigma2 full conditional (default).
    Slice,
    /// Random-walk Metropolis on log sigma2 with the given step variance.
    RandomWalkLog { step_var: f64 },
}

impl Default for Sigma2Update {
    fn default() -> Self {
        Sigma2Update::Slice
    }
}

/// Result of one sampler sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhOutcome {
    pub state: GeoState,
    pub joint_accepted: bool,
}

/// A running chain over the model, caching the correlation matrix and the
/// current log posterior between sweeps.
#[derive(Debug, Clone)]
pub struct GeoChain<'d> {
    data: &'d GeoData,
    state: GeoState,
    stream: RngStream,
    proposal_var: f64,
    sigma2_update: Sigma2Update,
    dist: DMatrix<f64>,
    corr: DMatrix<f64>,
    corr_proposal: DMatrix<f64>,
    scratch: EvalScratch,
    log_post: f64,
}

impl<'d> GeoChain<'d> {
    pub fn new(
        data: &'d GeoData,
        start: GeoState,
        stream: RngStream,
        proposal_var: f64,
        sigma2_update: Sigma2Update,
    ) -> Result<Self> {
        if !start.in_support() {
            return Err(Error::InvalidParameter {
                name: "start",
                value: start.tau2,
                reason: "starting state outside the prior support",
            });
        }
        if !(proposal_var >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "proposal_var",
                value: proposal_var,
                reason: "proposal variance must be nonnegative",
            });
        }
        let dist = distance_matrix(data.sites());
        let corr = correlation_from_distances(&dist, start.phi);
        let log_post = log_posterior_with_corr(&start, data, &corr);
        if !log_post.is_finite() {
            return Err(Error::NonFinite {
                context: "log posterior at the starting state",
            });
        }
        let corr_proposal = corr.clone();
        let scratch = EvalScratch::new(data.len());
        Ok(Self {
            data,
            state: start,
            stream,
            proposal_var,
            sigma2_update,
            dist,
            corr,
            corr_proposal,
            scratch,
            log_post,
        })
    }

    pub fn state(&self) -> &GeoState {
        &self.state
    }

    /// One sweep: the joint (tau2, phi, beta) random-walk move, then the
    /// sigma2 update.
    pub fn step(&mut self) -> MhOutcome {
        let joint_accepted = self.joint_move();
        match self.sigma2_update {
            Sigma2Update::Slice => self.sigma2_slice(),
            Sigma2Update::RandomWalkLog { step_var } => self.sigma2_rw_log(step_var),
        }
        MhOutcome {
            state: self.state,
            joint_accepted,
        }
    }

    fn joint_move(&mut self) -> bool {
        let pv = self.proposal_var;
        let proposal = GeoState {
            tau2: draw_normal(&mut self.stream, self.state.tau2, pv).expect("pv >= 0"),
            sigma2: self.state.sigma2,
            phi: draw_normal(&mut self.stream, self.state.phi, pv).expect("pv >= 0"),
            beta: draw_normal(&mut self.stream, self.state.beta, pv).expect("pv >= 0"),
        };

        let mut phi_changed = false;
        let log_post_prop = if proposal.in_support() {
            let corr = if proposal.phi == self.state.phi {
                &self.corr
            } else {
                phi_changed = true;
                correlation_from_distances_into(&self.dist, proposal.phi, &mut self.corr_proposal);
                &self.corr_proposal
            };
            log_posterior_scratch(&proposal, self.data, corr, &mut self.scratch)
        } else {
            f64::NEG_INFINITY
        };

        let accept = self.stream.uniform().ln() < log_post_prop - self.log_post;
        if accept {
            self.state = proposal;
            if phi_changed {
                std::mem::swap(&mut self.corr, &mut self.corr_proposal);
            }
            self.log_post = log_post_prop;
        }
        accept
    }

    fn sigma2_slice(&mut self) {
        let data = self.data;
        let corr = &self.corr;
        let scratch = &mut self.scratch;
        let base = self.state;
        let log_f = |s: f64| {
            if s <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let trial = GeoState { sigma2: s, ..base };
            log_posterior_scratch(&trial, data, corr, scratch)
        };
        let width = (0.4 * self.state.sigma2).max(0.5);
        let (new_sigma2, log_post) =
            slice_step(self.state.sigma2, log_f, width, 16, &mut self.stream);
        self.state.sigma2 = new_sigma2;
        self.log_post = log_post;
    }

    fn sigma2_rw_log(&mut self, step_var: f64) {
        let log_s = self.state.sigma2.ln();
        let log_s_prop = draw_normal(&mut self.stream, log_s, step_var).expect("step_var >= 0");
        let proposal = GeoState {
            sigma2: log_s_prop.exp(),
            ..self.state
        };
        let lp_prop =
            log_posterior_scratch(&proposal, self.data, &self.corr, &mut self.scratch);
        // symmetric on the log scale: include the change-of-variable term
        let log_ratio = (lp_prop + log_s_prop) - (self.log_post + log_s);
        if self.stream.uniform().ln() < log_ratio {
            self.state = proposal;
            self.log_post = lp_prop;
        }
    }
}

/// One sweep of the sampler without a persistent chain. Starting states
/// must lie in the support.
pub fn geo_mh_step(
    state: &GeoState,
    data: &GeoData,
    stream: RngStream,
    proposal_var: f64,
    sigma2_update: Sigma2Update,
) -> Result<(MhOutcome, RngStream)> {
    let mut chain = GeoChain::new(data, *state, stream, proposal_var, sigma2_update)?;
    let outcome = chain.step();
    Ok((outcome, chain.stream))
}

/// Rectangular region sites are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::Config(format!("empty region {self:?}")));
        }
        Ok(())
    }
}

/// Synthetic data set: N sites uniform over the region, covariate equal to
/// each site's latitude, response drawn from the model at `true_state`.
pub fn synth_geo_data(
    stream: &mut RngStream,
    n: usize,
    true_state: &GeoState,
    region: &Region,
) -> Result<GeoData> {
    region.validate()?;
    if !true_state.in_support() {
        return Err(Error::InvalidParameter {
            name: "true_state",
            value: true_state.tau2,
            reason: "generating state outside the prior support",
        });
    }
    if n < 3 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "need at least 3 sites",
        });
    }
    let sites: Vec<Site> = (0..n)
        .map(|_| Site {
            x: region.x_min + stream.uniform() * (region.x_max - region.x_min),
            y: region.y_min + stream.uniform() * (region.y_max - region.y_min),
        })
        .collect();
    let covariate: Vec<f64> = sites.iter().map(|s| s.y).collect();

    let corr = geo_correlation(&sites, true_state.phi);
    let sigma = covariance(true_state, &corr);
    let mean = DVector::from_iterator(n, covariate.iter().map(|x| x * true_state.beta));
    let response = draw_mvn(stream, &mean, &sigma)?;

    GeoData::new(sites, covariate, response.iter().copied().collect())
}
