//! Problem plugins: a pointwise loss `f(x; w)`, its gradient in `w`, the
//! base distribution `P` over the sample space and an exact evaluator.

pub mod gridworld;
mod logistic;
mod matfac;

pub use gridworld::{GridWorld, PolicyTrainer, Terminal, Trajectory};
pub use logistic::Logistic;
pub use matfac::MatFac;

use rand::Rng;

/// Sparse gradient as parallel index/value lists. Indices may repeat, in
/// which case the entries add.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseGrad {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseGrad {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.idx.clear();
        self.val.clear();
    }

    #[inline]
    pub fn push(&mut self, i: usize, v: f64) {
        self.idx.push(i);
        self.val.push(v);
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    /// Squared norm, assuming indices are distinct.
    pub fn norm_sq(&self) -> f64 {
        crate::math::norm_sq(&self.val)
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            out[i] += v;
        }
        out
    }
}

/// A finite-sum objective `E_P[f(x; w)]` with `P` uniform over the atoms.
pub trait Task {
    type Atom: Clone + std::fmt::Debug;

    /// Length of the parameter vector `w`.
    fn dim(&self) -> usize;

    /// Number of atoms in the sample space; `P` puts `1 / num_atoms` on each.
    fn num_atoms(&self) -> u128;

    /// Every atom, in a fixed order. Only sensible for small spaces.
    fn atoms(&self) -> Vec<Self::Atom>;

    /// One draw from `P`.
    fn draw_base<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Atom;

    fn loss(&self, w: &[f64], x: &Self::Atom) -> f64;

    /// Writes `grad_w f(x; w)` into `out` (cleared first) with distinct
    /// indices, and returns `f(x; w)`.
    fn grad(&self, w: &[f64], x: &Self::Atom, out: &mut SparseGrad) -> f64;

    /// Exact training objective as reported in metrics: the summed loss for
    /// matrix factorization, the mean log-loss for classification.
    fn objective(&self, w: &[f64]) -> f64;

    /// Row index used by row-keyed access-cost models.
    fn access_row(&self, x: &Self::Atom) -> usize;
}
