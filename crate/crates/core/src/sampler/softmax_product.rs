use rand::Rng;

use super::{check_density, check_finite, entropy, shift_normalize, Categorical, Draw, Sampler};
use crate::{Error, Result};

/// Independent softmax distributions over the rows and columns of an
/// `n x m` matrix: `Q(i, j) = softmax(tau_row)_i * softmax(tau_col)_j`.
///
/// `tau` is stored as `[tau_row; tau_col]` and each block is shifted so its
/// maximum is zero after every update, which leaves the distribution
/// unchanged.
#[derive(Debug, Clone)]
pub struct SoftmaxProduct {
    n: usize,
    m: usize,
    tau: Vec<f64>,
    rows: Categorical,
    cols: Categorical,
}

impl SoftmaxProduct {
    /// Uniform distribution over the `n x m` cells.
    pub fn uniform(n: usize, m: usize) -> Result<Self> {
        Self::with_tau(n, m, &vec![0.0; n + m])
    }

    pub fn with_tau(n: usize, m: usize, tau: &[f64]) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!("empty {n}x{m} sample space")));
        }
        if tau.len() != n + m {
            return Err(Error::DimensionMismatch(format!(
                "tau of length {} for a {n}x{m} space",
                tau.len()
            )));
        }
        check_finite(tau)?;
        let mut tau = tau.to_vec();
        shift_normalize(&mut tau[..n]);
        shift_normalize(&mut tau[n..]);
        let rows = Categorical::from_logits(&tau[..n])?;
        let cols = Categorical::from_logits(&tau[n..])?;
        Ok(Self { n, m, tau, rows, cols })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn row_probs(&self) -> Vec<f64> {
        self.rows.probs()
    }

    pub fn col_probs(&self) -> Vec<f64> {
        self.cols.probs()
    }

    /// Total sampling probability of the given rows.
    pub fn row_mass(&self, rows: impl IntoIterator<Item = usize>) -> f64 {
        rows.into_iter().map(|i| self.rows.prob(i)).sum()
    }

    pub fn col_mass(&self, cols: impl IntoIterator<Item = usize>) -> f64 {
        cols.into_iter().map(|j| self.cols.prob(j)).sum()
    }

    fn check(&self, &(i, j): &(usize, usize)) -> Result<()> {
        if i < self.n && j < self.m {
            Ok(())
        } else {
            Err(Error::AtomOutOfRange(format!(
                "cell ({i}, {j}) of a {}x{} matrix",
                self.n, self.m
            )))
        }
    }
}

impl Sampler for SoftmaxProduct {
    type Atom = (usize, usize);

    fn tau(&self) -> &[f64] {
        &self.tau
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw<(usize, usize)>> {
        let i = self.rows.sample(rng.random());
        let j = self.cols.sample(rng.random());
        let density = check_density(self.rows.relative(i) * self.cols.relative(j))?;
        Ok(Draw {
            sample: (i, j),
            density,
        })
    }

    fn density(&self, x: &(usize, usize)) -> Result<f64> {
        self.check(x)?;
        Ok(self.rows.relative(x.0) * self.cols.relative(x.1))
    }

    fn score(&self, x: &(usize, usize)) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut g = Vec::with_capacity(self.n + self.m);
        g.extend(self.rows.probs().into_iter().map(|p| -p));
        g.extend(self.cols.probs().into_iter().map(|p| -p));
        g[x.0] += 1.0;
        g[self.n + x.1] += 1.0;
        Ok(g)
    }

    fn score_sum(&self, weighted: &[((usize, usize), f64)]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.n + self.m];
        let mut total = 0.0;
        for (x, c) in weighted {
            self.check(x)?;
            g[x.0] += c;
            g[self.n + x.1] += c;
            total += c;
        }
        if total != 0.0 {
            for (k, p) in self.rows.probs().into_iter().enumerate() {
                g[k] -= total * p;
            }
            for (k, p) in self.cols.probs().into_iter().enumerate() {
                g[self.n + k] -= total * p;
            }
        }
        Ok(g)
    }

    fn set_tau(&mut self, tau: &[f64]) -> Result<()> {
        if tau.len() != self.n + self.m {
            return Err(Error::DimensionMismatch(format!(
                "tau of length {} for a {}x{} space",
                tau.len(),
                self.n,
                self.m
            )));
        }
        check_finite(tau)?;
        self.tau.copy_from_slice(tau);
        shift_normalize(&mut self.tau[..self.n]);
        shift_normalize(&mut self.tau[self.n..]);
        self.rows.rebuild(&self.tau[..self.n])?;
        self.cols.rebuild(&self.tau[self.n..])?;
        Ok(())
    }

    fn digest(&self) -> f64 {
        0.5 * (entropy(&self.rows.probs()) + entropy(&self.cols.probs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_density_is_one() {
        let s = SoftmaxProduct::uniform(4, 5).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                assert_eq!(s.density(&(i, j)).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn closed_form_two_by_two() {
        let s = SoftmaxProduct::with_tau(2, 2, &[3f64.ln(), 0.0, 0.0, 0.0]).unwrap();
        assert!((s.density(&(0, 0)).unwrap() - 1.5).abs() < 1e-15);
        assert!((s.density(&(1, 1)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_score_blocks() {
        let s = SoftmaxProduct::uniform(4, 5).unwrap();
        let g = s.score(&(2, 1)).unwrap();
        assert_eq!(&g[..4], &[-0.25, -0.25, 0.75, -0.25]);
        assert_eq!(&g[4..], &[-0.2, 0.8, -0.2, -0.2, -0.2]);
    }

    #[test]
    fn tau_blocks_are_shift_normalized() {
        let s = SoftmaxProduct::with_tau(2, 3, &[5.0, 1.0, -2.0, 4.0, 0.0]).unwrap();
        assert_eq!(s.tau(), &[0.0, -4.0, -6.0, 0.0, -4.0]);
    }

    #[test]
    fn out_of_range_cell() {
        let s = SoftmaxProduct::uniform(2, 2).unwrap();
        assert!(matches!(s.density(&(2, 0)), Err(Error::AtomOutOfRange(_))));
    }

    #[test]
    fn apply_delta_rejects_nan_and_keeps_state() {
        let mut s = SoftmaxProduct::uniform(2, 2).unwrap();
        let before = s.tau().to_vec();
        assert!(s.apply_delta(&[f64::NAN, 0.0, 0.0, 0.0]).is_err());
        assert_eq!(s.tau(), &before[..]);
    }

    #[test]
    fn score_sum_matches_dense_scores() {
        let s = SoftmaxProduct::with_tau(3, 2, &[0.3, -1.0, 0.2, 0.5, -0.4]).unwrap();
        let batch = vec![((0, 1), 2.0), ((2, 0), 0.5), ((0, 1), 1.0)];
        let fast = s.score_sum(&batch).unwrap();
        let mut slow = vec![0.0; 5];
        for (x, c) in &batch {
            for (a, g) in slow.iter_mut().zip(s.score(x).unwrap()) {
                *a += c * g;
            }
        }
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
