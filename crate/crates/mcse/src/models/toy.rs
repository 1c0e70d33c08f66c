//! Conjugate normal toy model: data y_1..y_K iid N(mu, lambda) under the
//! prior 1/sqrt(lambda). Both posterior means are available in closed form
//! (E mu = ybar, E lambda = (K-1)s^2 / (K-4)), so a sampler's estimation
//! error can be measured against exact truth. The model enters through the
//! sufficient statistics only.

use crate::dist::{draw_inverse_gamma, draw_normal, InverseGammaParams};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Sufficient statistics of the toy data set: the observation count, the
/// sample mean, and the sum of squared deviations (K-1)s^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyData {
    k: usize,
    y_bar: f64,
    ss: f64,
}

impl ToyData {
    /// K >= 5 keeps the Gibbs chain geometrically ergodic and both
    /// posterior means finite.
    pub fn new(k: usize, y_bar: f64, ss: f64) -> Result<Self> {
        if k < 5 {
            return Err(Error::InvalidParameter {
                name: "k",
                value: k as f64,
                reason: "toy model needs at least 5 observations",
            });
        }
        if !(ss > 0.0 && ss.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "ss",
                value: ss,
                reason: "sum of squared deviations must be positive",
            });
        }
        Ok(Self { k, y_bar, ss })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn y_bar(&self) -> f64 {
        self.y_bar
    }

    pub fn ss(&self) -> f64 {
        self.ss
    }
}

/// One point of the (mu, lambda) chain; lambda > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyState {
    pub mu: f64,
    pub lambda: f64,
}

/// Closed-form posterior means (E mu, E lambda).
pub fn toy_true_means(data: &ToyData) -> (f64, f64) {
    (data.y_bar, data.ss / (data.k as f64 - 4.0))
}

/// One sweep of the Gibbs sampler, updating lambda from its inverse-gamma
/// full conditional given the current mu, then mu from its normal full
/// conditional given the new lambda.
pub fn toy_gibbs_step(state: &ToyState, data: &ToyData, stream: &mut RngStream) -> ToyState {
    let k = data.k as f64;
    let dev = data.y_bar - state.mu;
    let cond = InverseGammaParams::new((k - 1.0) / 2.0, (data.ss + k * dev * dev) / 2.0)
        .expect("conditional parameters positive for valid data");
    let lambda = draw_inverse_gamma(stream, cond);
    let mu = draw_normal(stream, data.y_bar, lambda / k).expect("lambda/k positive");
    ToyState { mu, lambda }
}

/// One exact draw from the posterior: lambda from its inverse-gamma
/// marginal, then mu from the normal conditional.
pub fn toy_exact_draw(data: &ToyData, stream: &mut RngStream) -> ToyState {
    let k = data.k as f64;
    let marginal = InverseGammaParams::new((k - 2.0) / 2.0, data.ss / 2.0)
        .expect("marginal parameters positive for valid data");
    let lambda = draw_inverse_gamma(stream, marginal);
    let mu = draw_normal(stream, data.y_bar, lambda / k).expect("lambda/k positive");
    ToyState { mu, lambda }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_data() -> ToyData {
        ToyData::new(11, 1.0, 14.0).unwrap()
    }

    #[test]
    fn true_means_examples() {
        assert_eq!(toy_true_means(&reference_data()), (1.0, 2.0));
        assert_eq!(toy_true_means(&ToyData::new(5, 0.0, 1.0).unwrap()), (0.0, 1.0));
    }

    #[test]
    fn too_few_observations_rejected() {
        assert!(ToyData::new(4, 1.0, 14.0).is_err());
        assert!(ToyData::new(11, 1.0, 0.0).is_err());
    }

    #[test]
    fn lambda_conditional_moment() {
        // with mu held fixed, draws of lambda should match the
        // inverse-gamma mean of the full conditional
        let data = reference_data();
        let mut stream = crate::rng::RngStream::new(11, 0);
        let mu = 0.25;
        let k = data.k() as f64;
        let scale = (data.ss() + k * (data.y_bar() - mu) * (data.y_bar() - mu)) / 2.0;
        let shape = (k - 1.0) / 2.0;
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let state = toy_gibbs_step(&ToyState { mu, lambda: 1.0 }, &data, &mut stream);
            sum += state.lambda;
        }
        let mean = sum / n as f64;
        let target = scale / (shape - 1.0);
        assert!((mean - target).abs() / target < 0.02, "mean = {mean}");
    }

    #[test]
    fn mu_conditional_variance() {
        // with lambda effectively fixed by conditioning, mu draws have
        // variance lambda / K; sample directly from the conditional
        let data = reference_data();
        let mut stream = crate::rng::RngStream::new(12, 0);
        let lambda = 2.0;
        let k = data.k() as f64;
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let mu = crate::dist::draw_normal(&mut stream, data.y_bar(), lambda / k).unwrap();
            sum += mu;
            sumsq += mu * mu;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let target = lambda / k;
        assert!((var - target).abs() / target < 0.02, "var = {var}");
    }

    #[test]
    fn exact_draw_marginal_means() {
        let data = reference_data();
        let mut stream = crate::rng::RngStream::new(13, 0);
        let n = 100_000;
        let (mut sum_mu, mut sum_lambda) = (0.0, 0.0);
        for _ in 0..n {
            let s = toy_exact_draw(&data, &mut stream);
            sum_mu += s.mu;
            sum_lambda += s.lambda;
        }
        let mean_mu = sum_mu / n as f64;
        let mean_lambda = sum_lambda / n as f64;
        // marginal lambda mean is ss/(K-4) = 2
        assert!((mean_lambda - 2.0).abs() / 2.0 < 0.02, "lambda = {mean_lambda}");
        // mu is centered at ybar; posterior sd is roughly sqrt(2/11), so a
        // 4-sigma Monte Carlo band is ~0.0054
        let band = 4.0 * (2.0f64 / 11.0).sqrt() / (n as f64).sqrt();
        assert!((mean_mu - 1.0).abs() < band, "mu = {mean_mu}");
    }

    #[test]
    fn gibbs_preserves_stationarity_of_exact_draws() {
        // evolving exact draws one Gibbs step must not shift the mean of mu
        // beyond Monte Carlo noise (two-sample comparison, 3 combined SEs)
        let data = reference_data();
        let mut stream = crate::rng::RngStream::new(14, 0);
        let n = 100_000;
        let (mut exact_sum, mut exact_sq) = (0.0, 0.0);
        let (mut stepped_sum, mut stepped_sq) = (0.0, 0.0);
        for _ in 0..n {
            let s = toy_exact_draw(&data, &mut stream);
            exact_sum += s.mu;
            exact_sq += s.mu * s.mu;
            let evolved = toy_gibbs_step(&s, &data, &mut stream);
            stepped_sum += evolved.mu;
            stepped_sq += evolved.mu * evolved.mu;
        }
        let nf = n as f64;
        let m1 = exact_sum / nf;
        let m2 = stepped_sum / nf;
        let v1 = exact_sq / nf - m1 * m1;
        let v2 = stepped_sq / nf - m2 * m2;
        let combined_se = ((v1 + v2) / nf).sqrt();
        assert!(
            (m1 - m2).abs() < 3.0 * combined_se,
            "shift = {}, 3se = {}",
            (m1 - m2).abs(),
            3.0 * combined_se
        );
    }
}
