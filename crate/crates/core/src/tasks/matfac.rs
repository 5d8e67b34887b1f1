use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{SparseGrad, Task};
use crate::data::Matrix;
use crate::sampler::uniform_index;
use crate::{Error, Result};

/// Rank-`K` factorization `Y ~ U V^T` under the squared loss.
///
/// Parameters are laid out as `U` (row-major, `n x K`) followed by `V`
/// (row-major, `m x K`). The sample space is the set of cells `(i, j)`.
#[derive(Debug, Clone)]
pub struct MatFac {
    y: Matrix,
    rank: usize,
}

impl MatFac {
    pub fn new(y: Matrix, rank: usize) -> Result<Self> {
        if rank == 0 || y.rows() == 0 || y.cols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "rank {rank} factorization of a {}x{} matrix",
                y.rows(),
                y.cols()
            )));
        }
        Ok(Self { y, rank })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> (usize, usize) {
        self.y.shape()
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn y_mut(&mut self) -> &mut Matrix {
        &mut self.y
    }

    /// I.i.d. `N(0, 1/K)` factors.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let normal = Normal::new(0.0, 1.0 / (self.rank as f64).sqrt()).expect("valid std");
        (0..self.dim()).map(|_| normal.sample(rng)).collect()
    }

    /// Packs explicit factors into the parameter layout.
    pub fn params_from_factors(&self, u: &Matrix, v: &Matrix) -> Result<Vec<f64>> {
        let (n, m) = self.shape();
        if u.shape() != (n, self.rank) || v.shape() != (m, self.rank) {
            return Err(Error::DimensionMismatch(format!(
                "factors {:?} and {:?} for a {n}x{m} rank-{} task",
                u.shape(),
                v.shape(),
                self.rank
            )));
        }
        let mut w = u.as_slice().to_vec();
        w.extend_from_slice(v.as_slice());
        Ok(w)
    }

    #[inline]
    pub fn u_offset(&self, i: usize) -> usize {
        i * self.rank
    }

    #[inline]
    pub fn v_offset(&self, j: usize) -> usize {
        (self.y.rows() + j) * self.rank
    }

    /// `s = u_i . v_j - y_ij`.
    #[inline]
    pub fn residual(&self, w: &[f64], i: usize, j: usize) -> f64 {
        let u = &w[self.u_offset(i)..self.u_offset(i) + self.rank];
        let v = &w[self.v_offset(j)..self.v_offset(j) + self.rank];
        crate::math::dot(u, v) - self.y.get(i, j)
    }

    /// `sum_ij (u_i . v_j - y_ij)^2`.
    pub fn exact_loss(&self, w: &[f64]) -> f64 {
        let (n, m) = self.shape();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..m {
                let s = self.residual(w, i, j);
                total += s * s;
            }
        }
        total
    }
}

impl Task for MatFac {
    type Atom = (usize, usize);

    fn dim(&self) -> usize {
        (self.y.rows() + self.y.cols()) * self.rank
    }

    fn num_atoms(&self) -> u128 {
        self.y.rows() as u128 * self.y.cols() as u128
    }

    fn atoms(&self) -> Vec<(usize, usize)> {
        let (n, m) = self.shape();
        (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect()
    }

    fn draw_base<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let i = uniform_index(rng.random(), self.y.rows());
        let j = uniform_index(rng.random(), self.y.cols());
        (i, j)
    }

    fn loss(&self, w: &[f64], &(i, j): &(usize, usize)) -> f64 {
        let s = self.residual(w, i, j);
        s * s
    }

    fn grad(&self, w: &[f64], &(i, j): &(usize, usize), out: &mut SparseGrad) -> f64 {
        out.clear();
        let s = self.residual(w, i, j);
        let (uo, vo) = (self.u_offset(i), self.v_offset(j));
        for k in 0..self.rank {
            out.push(uo + k, 2.0 * w[vo + k] * s);
        }
        for k in 0..self.rank {
            out.push(vo + k, 2.0 * w[uo + k] * s);
        }
        s * s
    }

    fn objective(&self, w: &[f64]) -> f64 {
        self.exact_loss(w)
    }

    fn access_row(&self, x: &(usize, usize)) -> usize {
        x.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell_grad(u: [f64; 2], v: [f64; 2], y: f64) -> Vec<f64> {
        let task = MatFac::new(Matrix::from_vec(1, 1, vec![y]).unwrap(), 2).unwrap();
        let w = [u[0], u[1], v[0], v[1]];
        let mut g = SparseGrad::new();
        task.grad(&w, &(0, 0), &mut g);
        g.to_dense(4)
    }

    #[test]
    fn gradient_closed_form() {
        // s = 1*2 - 1 = 1; grad u = 2 v s, grad v = 2 u s.
        assert_eq!(cell_grad([1.0, 0.0], [2.0, 0.0], 1.0), vec![4.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn perfect_cell_has_zero_gradient() {
        assert_eq!(cell_grad([1.0, 2.0], [3.0, 0.5], 4.0), vec![0.0; 4]);
    }

    #[test]
    fn exact_fit_has_zero_loss() {
        let u = Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        let task = MatFac::new(u.mul_transpose(&u).unwrap(), 1).unwrap();
        let w = task.params_from_factors(&u, &u).unwrap();
        assert_eq!(task.exact_loss(&w), 0.0);
    }

    #[test]
    fn two_by_two_loss_by_hand() {
        // Y = [[1,2],[2,4]], u = v = (1,1): residuals 0, -1, -1, -3.
        let y = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        let task = MatFac::new(y, 1).unwrap();
        assert_eq!(task.exact_loss(&[1.0; 4]), 11.0);
    }

    #[test]
    fn layout_offsets() {
        let task = MatFac::new(Matrix::zeros(3, 4), 2).unwrap();
        assert_eq!(task.dim(), 14);
        assert_eq!(task.u_offset(2), 4);
        assert_eq!(task.v_offset(0), 6);
        assert_eq!(task.v_offset(3), 12);
    }
}
