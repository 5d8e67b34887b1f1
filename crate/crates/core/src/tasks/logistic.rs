use rand::Rng;

use super::{SparseGrad, Task};
use crate::data::Matrix;
use crate::math::{dot, sigmoid, softplus};
use crate::sampler::uniform_index;
use crate::{Error, Result};

/// Binary logistic regression on fixed feature vectors with labels in
/// `{-1, +1}`: `f(i; w) = log(1 + exp(-y_i w . phi_i))`.
#[derive(Debug, Clone)]
pub struct Logistic {
    features: Matrix,
    labels: Vec<i8>,
}

impl Logistic {
    pub fn new(features: Matrix, labels: Vec<i8>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::InvalidArgument(format!("label {bad}, expected -1 or +1")));
        }
        if !labels.contains(&1) {
            return Err(Error::EmptyClass(1));
        }
        if !labels.contains(&-1) {
            return Err(Error::EmptyClass(-1));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `y_i w . phi_i`.
    pub fn margin(&self, w: &[f64], i: usize) -> f64 {
        f64::from(self.labels[i]) * dot(w, self.features.row(i))
    }

    /// Mean log-loss over the training set.
    pub fn mean_log_loss(&self, w: &[f64]) -> f64 {
        (0..self.len()).map(|i| softplus(-self.margin(w, i))).sum::<f64>() / self.len() as f64
    }
}

impl Task for Logistic {
    type Atom = usize;

    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn num_atoms(&self) -> u128 {
        self.labels.len() as u128
    }

    fn atoms(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    fn draw_base<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        uniform_index(rng.random(), self.len())
    }

    fn loss(&self, w: &[f64], &i: &usize) -> f64 {
        softplus(-self.margin(w, i))
    }

    fn grad(&self, w: &[f64], &i: &usize, out: &mut SparseGrad) -> f64 {
        out.clear();
        let margin = self.margin(w, i);
        let coef = (sigmoid(margin) - 1.0) * f64::from(self.labels[i]);
        for (k, &phi) in self.features.row(i).iter().enumerate() {
            out.push(k, coef * phi);
        }
        softplus(-margin)
    }

    fn objective(&self, w: &[f64]) -> f64 {
        self.mean_log_loss(w)
    }

    fn access_row(&self, x: &usize) -> usize {
        *x
    }
}
