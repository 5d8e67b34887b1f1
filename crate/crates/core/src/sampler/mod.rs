//! Parametric sampling families `Q_tau` over finite sample spaces.
//!
//! Every family exposes the three things the algorithms consume: a draw, the
//! density `q = dQ_tau/dP` relative to the base distribution `P`, and the score
//! `grad_tau log q`.

mod categorical;
mod label_bias;
mod policy_table;
mod softmax_product;

pub use categorical::Categorical;
pub(crate) use categorical::uniform_index;
pub use label_bias::LabelBias;
pub use policy_table::PolicyTable;
pub use softmax_product::SoftmaxProduct;

use rand::Rng;

use crate::{Error, Result};

/// Draws whose density falls below this are rejected rather than clamped.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// One sample from `Q_tau` together with its density under the `tau` it was
/// drawn from. The score is computed on demand with [`Sampler::score`].
#[derive(Debug, Clone, PartialEq)]
pub struct Draw<A> {
    pub sample: A,
    pub density: f64,
}

pub trait Sampler {
    type Atom: Clone + std::fmt::Debug;

    fn tau(&self) -> &[f64];

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw<Self::Atom>>;

    /// `q(x; tau)`, the density of `Q_tau` with respect to `P`.
    fn density(&self, x: &Self::Atom) -> Result<f64>;

    /// `grad_tau log q(x; tau)`, same length as `tau`.
    fn score(&self, x: &Self::Atom) -> Result<Vec<f64>>;

    /// `sum_b c_b * score(x_b)`. Families override this when the sum has a
    /// cheaper form than summing dense scores.
    fn score_sum(&self, weighted: &[(Self::Atom, f64)]) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.tau().len()];
        for (x, c) in weighted {
            for (a, s) in acc.iter_mut().zip(self.score(x)?) {
                *a += c * s;
            }
        }
        Ok(acc)
    }

    /// Replace `tau`, renormalizing where the family is shift invariant.
    fn set_tau(&mut self, tau: &[f64]) -> Result<()>;

    /// `tau += delta`. The state is left untouched when the result is not
    /// finite.
    fn apply_delta(&mut self, delta: &[f64]) -> Result<()> {
        if delta.len() != self.tau().len() {
            return Err(Error::DimensionMismatch(format!(
                "tau step of length {} for tau of length {}",
                delta.len(),
                self.tau().len()
            )));
        }
        let next: Vec<f64> = self.tau().iter().zip(delta).map(|(t, d)| t + d).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteUpdate("sampler parameters"));
        }
        self.set_tau(&next)
    }

    /// A single family-specific number tracking where `tau` is: the
    /// log-odds itself for label bias, the mean entropy of the row and
    /// column distributions for the softmax product, the mean per-state
    /// policy entropy for policy tables.
    fn digest(&self) -> f64;
}

pub(crate) fn check_density(q: f64) -> Result<f64> {
    if q.is_finite() && q >= DENSITY_FLOOR {
        Ok(q)
    } else if q.is_nan() {
        Err(Error::NumericOverflow)
    } else {
        Err(Error::DensityUnderflow(q))
    }
}

pub(crate) fn check_finite(tau: &[f64]) -> Result<()> {
    if tau.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteUpdate("sampler parameters"))
    }
}

/// Subtract the block maximum so the largest logit is exactly zero.
pub(crate) fn shift_normalize(block: &mut [f64]) {
    let max = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_finite() && max != 0.0 {
        block.iter_mut().for_each(|v| *v -= max);
    }
}

pub(crate) fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}
