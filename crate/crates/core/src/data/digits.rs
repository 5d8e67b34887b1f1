//! Synthetic stand-ins for handwritten digits on a 28 x 28 grid: a ring
//! ("zero") and a short vertical bar ("one") that fits inside the ring's
//! hole, so the two patterns light up disjoint pixels.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Matrix;
use crate::{Error, Result};

pub const IMAGE_SIDE: usize = 28;
pub const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

const CENTRE: f64 = 13.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DigitPatterns {
    pub ring: Vec<f64>,
    pub bar: Vec<f64>,
}

impl DigitPatterns {
    /// Pixels where the bar pattern is lit.
    pub fn bar_pixels(&self) -> Vec<usize> {
        lit(&self.bar)
    }

    pub fn ring_pixels(&self) -> Vec<usize> {
        lit(&self.ring)
    }
}

fn lit(p: &[f64]) -> Vec<usize> {
    p.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(k, _)| k).collect()
}

pub fn digit_patterns() -> DigitPatterns {
    let mut ring = vec![0.0; PIXELS];
    let mut bar = vec![0.0; PIXELS];
    for r in 0..IMAGE_SIDE {
        for c in 0..IMAGE_SIDE {
            let (dy, dx) = (r as f64 - CENTRE, c as f64 - CENTRE);
            let radius = (dx * dx + dy * dy).sqrt();
            if (7.0..=11.0).contains(&radius) {
                ring[r * IMAGE_SIDE + c] = 1.0;
            }
            if dx.abs() <= 1.5 && dy.abs() <= 5.5 {
                bar[r * IMAGE_SIDE + c] = 1.0;
            }
        }
    }
    DigitPatterns { ring, bar }
}

/// `rows` noisy copies of `pattern`: each row is `a_r * pattern` plus
/// Gaussian noise of std `noise` on lit pixels, clamped to `[0, 1]`, with
/// `a_r` uniform on `[0.6, 1]`.
pub fn pattern_rows<R: Rng + ?Sized>(pattern: &[f64], rows: usize, noise: f64, rng: &mut R) -> Result<Matrix> {
    let normal = Normal::new(0.0, noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut data = Vec::with_capacity(rows * pattern.len());
    for _ in 0..rows {
        let a: f64 = rng.random_range(0.6..=1.0);
        for &p in pattern {
            let v = if p > 0.0 { a * p + normal.sample(rng) } else { 0.0 };
            data.push(v.clamp(0.0, 1.0));
        }
    }
    Matrix::from_vec(rows, pattern.len(), data)
}
