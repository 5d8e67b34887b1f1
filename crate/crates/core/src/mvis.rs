//! Minimal-variance importance sampling.
//!
//! Estimates `gamma = E_P[f]` by averaging `f(x_t) / q(x_t; tau_t)` over
//! draws `x_t ~ Q_tau_t`, while moving `tau` along
//! `eta * (f / q)^2 * grad_tau log q`, a stochastic descent direction for the
//! estimator variance.

use rand::Rng;

use crate::optimizer::{Schedule, StepSize};
use crate::sampler::Sampler;
use crate::stats::Welford;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MvisRecord {
    pub t: u64,
    /// `f(x_t) / q(x_t; tau_t)` under the pre-update `tau`.
    pub weighted_value: f64,
    pub gamma_hat: f64,
    /// `NaN` until two samples have been seen.
    pub std_dev: f64,
    pub tau_norm: f64,
}

pub const MVIS_HEADER: &str = "t,weighted_value,gamma_hat,std_dev,tau_norm";

#[derive(Debug, Clone)]
pub struct Mvis<S: Sampler> {
    sampler: S,
    eta: Option<StepSize>,
    sum: f64,
    moments: Welford,
}

impl<S: Sampler> Mvis<S> {
    pub fn new(sampler: S, eta: Schedule) -> Result<Self> {
        let dim = sampler.tau().len();
        Ok(Self {
            sampler,
            eta: Some(StepSize::new(eta, dim)?),
            sum: 0.0,
            moments: Welford::default(),
        })
    }

    /// Plain importance sampling from a fixed `Q_tau`.
    pub fn frozen(sampler: S) -> Self {
        Self {
            sampler,
            eta: None,
            sum: 0.0,
            moments: Welford::default(),
        }
    }

    pub fn sampler(&self) -> &S {
        &self.sampler
    }

    pub fn t(&self) -> u64 {
        self.moments.count()
    }

    pub fn running_sum(&self) -> f64 {
        self.sum
    }

    pub fn moments(&self) -> &Welford {
        &self.moments
    }

    pub fn step<F, R>(&mut self, f: F, rng: &mut R) -> Result<MvisRecord>
    where
        F: Fn(&S::Atom) -> f64,
        R: Rng + ?Sized,
    {
        let draw = self.sampler.draw(rng)?;
        let value = f(&draw.sample) / draw.density;
        if let Some(eta) = self.eta.as_mut() {
            let t = self.moments.count();
            let coef = value * value;
            let score = self.sampler.score(&draw.sample)?;
            let rate = eta.rate(t);
            let delta: Vec<f64> = score
                .iter()
                .enumerate()
                .map(|(k, &g)| if g != 0.0 { eta.delta(rate, k, coef * g) } else { 0.0 })
                .collect();
            self.sampler.apply_delta(&delta)?;
        }
        self.sum += value;
        self.moments.push(value);
        let t = self.moments.count();
        let std_dev = self.estimate().map_or(f64::NAN, |(_, s)| s);
        Ok(MvisRecord {
            t: t - 1,
            weighted_value: value,
            gamma_hat: self.sum / t as f64,
            std_dev,
            tau_norm: crate::math::norm_sq(self.sampler.tau()).sqrt(),
        })
    }

    /// `(gamma_hat, std_dev)` with `gamma_hat = sum / t` and
    /// `std_dev = sqrt(M2 / (t - 1)) / sqrt(t)`.
    pub fn estimate(&self) -> Result<(f64, f64)> {
        let t = self.moments.count();
        let var = self.moments.sample_variance().ok_or(Error::InsufficientSamples(t))?;
        Ok((self.sum / t as f64, (var / t as f64).sqrt()))
    }
}

/// Exact variance of one weighted value `f(x) / q(x; tau)` under `Q_tau`:
/// `sum_x P(x) f(x)^2 / q(x) - gamma^2`, with `P` uniform over `atoms`.
pub fn exact_variance<S: Sampler>(sampler: &S, atoms: &[(S::Atom, f64)]) -> Result<f64> {
    if atoms.is_empty() {
        return Err(Error::InvalidArgument("empty sample space".into()));
    }
    let p = 1.0 / atoms.len() as f64;
    let mut second = 0.0;
    let mut mean = 0.0;
    for (x, f) in atoms {
        second += p * f * f / sampler.density(x)?;
        mean += p * f;
    }
    Ok(second - mean * mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::SoftmaxProduct;
    use crate::seeding::{rng, Stream};

    #[test]
    fn constant_function_has_zero_spread() {
        let mut m = Mvis::frozen(SoftmaxProduct::uniform(3, 4).unwrap());
        let mut r = rng(1, Stream::Sampling);
        for _ in 0..20 {
            assert_eq!(m.step(|_| 2.5, &mut r).unwrap().weighted_value, 2.5);
        }
        assert_eq!(m.moments().m2(), 0.0);
        assert_eq!(m.estimate().unwrap(), (2.5, 0.0));
    }

    #[test]
    fn first_adaptive_step_scales_with_value_squared() {
        let eta = 0.01;
        let mut m = Mvis::new(SoftmaxProduct::uniform(3, 4).unwrap(), Schedule::Constant { rate: eta }).unwrap();
        let mut r = rng(1, Stream::Sampling);
        let start = m.sampler().clone();
        let rec = m.step(|_| 2.0, &mut r).unwrap();
        assert_eq!(rec.weighted_value, 2.0);
        // recover the drawn cell from the row/column that moved up
        let tau = m.sampler().tau();
        let i = (0..3).find(|&i| tau[i] == 0.0).unwrap();
        let j = (0..4).find(|&j| tau[3 + j] == 0.0).unwrap();
        let score = start.score(&(i, j)).unwrap();
        let mut expected: Vec<f64> = score.iter().map(|s| eta * 4.0 * s).collect();
        crate::sampler::shift_normalize(&mut expected[..3]);
        crate::sampler::shift_normalize(&mut expected[3..]);
        for (a, b) in tau.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn one_sample_is_insufficient() {
        let mut m = Mvis::frozen(SoftmaxProduct::uniform(2, 2).unwrap());
        m.step(|_| 1.0, &mut rng(1, Stream::Sampling)).unwrap();
        assert!(matches!(m.estimate(), Err(Error::InsufficientSamples(1))));
    }

    #[test]
    fn optimal_proposal_has_zero_variance() {
        // domain {0, 1} as a 2x1 product space, f = (1, 3), Q = (1/4, 3/4)
        let s = SoftmaxProduct::with_tau(2, 1, &[0.0, 3f64.ln(), 0.0]).unwrap();
        let atoms = vec![((0, 0), 1.0), ((1, 0), 3.0)];
        assert!(exact_variance(&s, &atoms).unwrap().abs() < 1e-12);
        let mut m = Mvis::frozen(s);
        let mut r = rng(9, Stream::Sampling);
        for _ in 0..50 {
            let rec = m.step(|&(i, _)| if i == 0 { 1.0 } else { 3.0 }, &mut r).unwrap();
            assert!((rec.weighted_value - 2.0).abs() < 1e-12);
        }
        let (g, sd) = m.estimate().unwrap();
        assert!((g - 2.0).abs() < 1e-12);
        assert!(sd < 1e-7);
    }
}
