use rand::seq::SliceRandom;

use super::Matrix;
use crate::seeding::{rng, Stream};
use crate::{Error, Result};

/// Progressive replacement of the rows of `A` by rows of `B`.
///
/// Between `start` and `end` samples, the number of replaced rows grows
/// linearly from zero to all of them. Replaced rows and their sources are
/// picked uniformly at random without replacement (sources cycle if `B` has
/// fewer rows than `A`).
#[derive(Debug, Clone)]
pub struct NonStationary {
    b: Matrix,
    start: u64,
    end: u64,
    order: Vec<usize>,
    sources: Vec<usize>,
    applied: usize,
}

impl NonStationary {
    pub fn new(a: &Matrix, b: Matrix, start: u64, end: u64, seed: u64) -> Result<Self> {
        if a.cols() != b.cols() {
            return Err(Error::DimensionMismatch(format!(
                "rows of width {} cannot replace rows of width {}",
                b.cols(),
                a.cols()
            )));
        }
        if b.rows() == 0 || end < start {
            return Err(Error::InvalidArgument(format!(
                "substitution window [{start}, {end}] from {} rows",
                b.rows()
            )));
        }
        let mut r = rng(seed, Stream::Substitution);
        let mut order: Vec<usize> = (0..a.rows()).collect();
        order.shuffle(&mut r);
        let mut perm: Vec<usize> = (0..b.rows()).collect();
        perm.shuffle(&mut r);
        let sources = (0..a.rows()).map(|k| perm[k % perm.len()]).collect();
        Ok(Self {
            b,
            start,
            end,
            order,
            sources,
            applied: 0,
        })
    }

    /// Rows that should be replaced once `samples` samples have been seen.
    pub fn target(&self, samples: u64) -> usize {
        let total = self.order.len();
        if samples <= self.start {
            0
        } else if samples >= self.end {
            total
        } else {
            let frac = (samples - self.start) as f64 / (self.end - self.start) as f64;
            ((frac * total as f64).floor() as usize).min(total)
        }
    }

    /// Replaced rows of `A`, in replacement order.
    pub fn replaced_rows(&self) -> &[usize] {
        &self.order[..self.applied]
    }

    /// Brings `y` (initially `A`) up to date; returns how many rows changed.
    pub fn advance(&mut self, y: &mut Matrix, samples: u64) -> usize {
        let target = self.target(samples);
        let before = self.applied;
        for k in self.applied..target {
            y.row_mut(self.order[k]).copy_from_slice(self.b.row(self.sources[k]));
        }
        self.applied = self.applied.max(target);
        self.applied - before
    }

    /// The matrix seen after `samples` samples, built from scratch.
    pub fn view(&self, a: &Matrix, samples: u64) -> Matrix {
        let mut y = a.clone();
        for k in 0..self.target(samples) {
            y.row_mut(self.order[k]).copy_from_slice(self.b.row(self.sources[k]));
        }
        y
    }

    pub fn source_row(&self, k: usize) -> usize {
        self.sources[k]
    }
}
