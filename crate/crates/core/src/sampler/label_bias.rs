use rand::Rng;

use super::categorical::uniform_index;
use super::{check_density, check_finite, Draw, Sampler};
use crate::math::sigmoid;
use crate::{Error, Result};

/// Label-dependent sampling over `n` labelled items.
///
/// `tau` is the log-odds of drawing a positive item; within a class items are
/// uniform. The density relative to the empirical uniform distribution is
/// `q(i) = (n / n(y_i)) * sigmoid(y_i * tau)`.
#[derive(Debug, Clone)]
pub struct LabelBias {
    labels: Vec<i8>,
    positives: Vec<usize>,
    negatives: Vec<usize>,
    tau: [f64; 1],
}

impl LabelBias {
    pub fn new(labels: &[i8], tau: f64) -> Result<Self> {
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for (i, &y) in labels.iter().enumerate() {
            match y {
                1 => positives.push(i),
                -1 => negatives.push(i),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "label {other} at index {i}, expected -1 or +1"
                    )))
                }
            }
        }
        if positives.is_empty() {
            return Err(Error::EmptyClass(1));
        }
        if negatives.is_empty() {
            return Err(Error::EmptyClass(-1));
        }
        check_finite(&[tau])?;
        Ok(Self {
            labels: labels.to_vec(),
            positives,
            negatives,
            tau: [tau],
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self, y: i8) -> usize {
        if y > 0 {
            self.positives.len()
        } else {
            self.negatives.len()
        }
    }

    /// Probability that a draw is a positive item.
    pub fn positive_probability(&self) -> f64 {
        sigmoid(self.tau[0])
    }

    fn label(&self, x: usize) -> Result<i8> {
        self.labels
            .get(x)
            .copied()
            .ok_or_else(|| Error::AtomOutOfRange(format!("item {x} of {}", self.labels.len())))
    }
}

impl Sampler for LabelBias {
    type Atom = usize;

    fn tau(&self) -> &[f64] {
        &self.tau
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw<usize>> {
        let u: f64 = rng.random();
        let class = if u < sigmoid(self.tau[0]) {
            &self.positives
        } else {
            &self.negatives
        };
        let sample = class[uniform_index(rng.random(), class.len())];
        let density = check_density(self.density(&sample)?)?;
        Ok(Draw { sample, density })
    }

    fn density(&self, x: &usize) -> Result<f64> {
        let y = self.label(*x)?;
        let n = self.labels.len() as f64;
        let ny = self.class_count(y) as f64;
        Ok(n / ny * sigmoid(f64::from(y) * self.tau[0]))
    }

    fn score(&self, x: &usize) -> Result<Vec<f64>> {
        let y = f64::from(self.label(*x)?);
        Ok(vec![y * (1.0 - sigmoid(y * self.tau[0]))])
    }

    fn set_tau(&mut self, tau: &[f64]) -> Result<()> {
        if tau.len() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "label bias takes one parameter, got {}",
                tau.len()
            )));
        }
        check_finite(tau)?;
        self.tau[0] = tau[0];
        Ok(())
    }

    fn digest(&self) -> f64 {
        self.tau[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize, pos: usize) -> Vec<i8> {
        (0..n).map(|i| if i < pos { 1 } else { -1 }).collect()
    }

    #[test]
    fn positive_density_at_zero_tau() {
        let s = LabelBias::new(&labels(100, 10), 0.0).unwrap();
        assert_eq!(s.density(&0).unwrap(), 5.0);
        assert!((s.density(&50).unwrap() - 100.0 / 90.0 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn positive_density_at_tau_two() {
        // 10 / (1 + e^-2), evaluated independently.
        let s = LabelBias::new(&labels(100, 10), 2.0).unwrap();
        assert!((s.density(&3).unwrap() - 8.807_970_779_778_824).abs() < 1e-12);
    }

    #[test]
    fn empty_class_is_rejected() {
        assert!(matches!(LabelBias::new(&[1, 1], 0.0), Err(Error::EmptyClass(-1))));
        assert!(matches!(LabelBias::new(&[-1], 0.0), Err(Error::EmptyClass(1))));
        assert!(LabelBias::new(&[1, 0], 0.0).is_err());
    }

    #[test]
    fn out_of_range_atom() {
        let s = LabelBias::new(&labels(4, 2), 0.0).unwrap();
        assert!(matches!(s.density(&4), Err(Error::AtomOutOfRange(_))));
        assert!(matches!(s.score(&9), Err(Error::AtomOutOfRange(_))));
    }

    #[test]
    fn score_is_the_log_odds_gradient() {
        let s = LabelBias::new(&labels(10, 3), 0.7).unwrap();
        assert!((s.score(&0).unwrap()[0] - (1.0 - sigmoid(0.7))).abs() < 1e-15);
        assert!((s.score(&5).unwrap()[0] + (1.0 - sigmoid(-0.7))).abs() < 1e-15);
    }
}
