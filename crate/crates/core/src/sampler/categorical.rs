use crate::{Error, Result};

/// Categorical distribution over `0..len` parametrized by logits, sampled by
/// inverse CDF over a cached prefix sum of unnormalized weights.
///
/// Weights are `exp(z - max z)`, so for all-equal logits every weight is
/// exactly 1, the prefix sums are exact integers and a draw from uniform `u`
/// lands on `floor(u * len)`, the same index a plain uniform draw picks.
#[derive(Debug, Clone)]
pub struct Categorical {
    weights: Vec<f64>,
    cdf: Vec<f64>,
}

impl Categorical {
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        let mut c = Self {
            weights: Vec::with_capacity(logits.len()),
            cdf: Vec::with_capacity(logits.len()),
        };
        c.rebuild(logits)?;
        Ok(c)
    }

    pub fn rebuild(&mut self, logits: &[f64]) -> Result<()> {
        if logits.is_empty() {
            return Err(Error::InvalidArgument("categorical over an empty set".into()));
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFiniteUpdate("sampler parameters"));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.weights.clear();
        self.cdf.clear();
        let mut acc = 0.0;
        for &z in logits {
            let w = (z - max).exp();
            acc += w;
            self.weights.push(w);
            self.cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::NumericOverflow);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn total(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.weights[k] / self.total()
    }

    /// `len * prob(k)`: the density of this distribution relative to the
    /// uniform one. Exactly 1 for uniform logits.
    pub fn relative(&self, k: usize) -> f64 {
        (self.len() as f64 * self.weights[k]) / self.total()
    }

    pub fn probs(&self) -> Vec<f64> {
        let total = self.total();
        self.weights.iter().map(|w| w / total).collect()
    }

    /// Inverse-CDF draw for `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> usize {
        let target = u * self.total();
        self.cdf
            .partition_point(|&c| c <= target)
            .min(self.len() - 1)
    }
}

/// Uniform index draw matching [`Categorical::sample`] on uniform logits.
pub(crate) fn uniform_index(u: f64, len: usize) -> usize {
    ((u * len as f64) as usize).min(len - 1)
}
