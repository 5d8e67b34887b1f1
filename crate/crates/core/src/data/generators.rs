use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Matrix;
use crate::seeding::{rng, Stream};
use crate::{Error, Result};

/// `Y = U V^T` with i.i.d. standard normal factors, optionally with one
/// square block multiplied by `block_scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowRankSpec {
    pub n: usize,
    pub m: usize,
    pub rank: usize,
    /// Side of the scaled block; 0 for none.
    pub block_size: usize,
    pub block_scale: f64,
}

impl LowRankSpec {
    /// The 100 x 100 rank-10 benchmark with a 20 x 20 block scaled by 100.
    pub fn block_benchmark() -> Self {
        Self {
            n: 100,
            m: 100,
            rank: 10,
            block_size: 20,
            block_scale: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRank {
    pub y: Matrix,
    pub u: Matrix,
    pub v: Matrix,
    /// Top-left corner of the scaled block.
    pub block: Option<(usize, usize)>,
}

impl LowRank {
    /// Whether cell `(i, j)` lies in the scaled block.
    pub fn in_block(&self, i: usize, j: usize, size: usize) -> bool {
        self.block
            .is_some_and(|(r, c)| (r..r + size).contains(&i) && (c..c + size).contains(&j))
    }
}

pub fn low_rank(spec: &LowRankSpec, seed: u64) -> Result<LowRank> {
    let &LowRankSpec {
        n,
        m,
        rank,
        block_size,
        block_scale,
    } = spec;
    if n == 0 || m == 0 || rank == 0 {
        return Err(Error::InvalidArgument(format!("{n}x{m} rank-{rank} matrix")));
    }
    if block_size > n.min(m) {
        return Err(Error::InvalidArgument(format!(
            "block of side {block_size} does not fit a {n}x{m} matrix"
        )));
    }
    let mut r = rng(seed, Stream::Data);
    let mut gauss = |_, _| -> f64 { StandardNormal.sample(&mut r) };
    let u = Matrix::from_fn(n, rank, &mut gauss);
    let v = Matrix::from_fn(m, rank, &mut gauss);
    let mut y = u.mul_transpose(&v)?;
    let block = (block_size > 0).then(|| (r.random_range(0..=n - block_size), r.random_range(0..=m - block_size)));
    if let Some((r0, c0)) = block {
        for i in r0..r0 + block_size {
            for v in &mut y.row_mut(i)[c0..c0 + block_size] {
                *v *= block_scale;
            }
        }
    }
    Ok(LowRank { y, u, v, block })
}

/// Two Gaussian clouds centred at `+-(separation / 2) * e` for a random unit
/// vector `e`, with unit isotropic noise. Positives come first.
pub fn imbalanced_logistic(n_pos: usize, n_neg: usize, dim: usize, separation: f64, seed: u64) -> Result<(Matrix, Vec<i8>)> {
    if n_pos == 0 || n_neg == 0 || dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "{n_pos} positives, {n_neg} negatives in dimension {dim}"
        )));
    }
    let mut r = rng(seed, Stream::Data);
    let mut e: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut r)).collect();
    let norm = crate::math::norm_sq(&e).sqrt();
    e.iter_mut().for_each(|x| *x /= norm);
    let labels: Vec<i8> = std::iter::repeat_n(1, n_pos).chain(std::iter::repeat_n(-1, n_neg)).collect();
    let features = Matrix::from_fn(n_pos + n_neg, dim, |i, k| {
        let noise: f64 = StandardNormal.sample(&mut r);
        f64::from(labels[i]) * 0.5 * separation * e[k] + noise
    });
    Ok((features, labels))
}
