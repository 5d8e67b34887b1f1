use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Step-size schedule for either parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    /// `rate` at every step.
    Constant { rate: f64 },
    /// `rate / (offset + t)`.
    InverseTime { rate: f64, offset: f64 },
    /// Per-coordinate `rate / (sqrt(sum of squared gradients) + eps)`.
    AdaGrad { rate: f64, eps: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Schedule::Constant { rate } => rate > 0.0 && rate.is_finite(),
            Schedule::InverseTime { rate, offset } => {
                rate > 0.0 && rate.is_finite() && offset > 0.0 && offset.is_finite()
            }
            Schedule::AdaGrad { rate, eps } => {
                rate > 0.0 && rate.is_finite() && eps >= 0.0 && eps.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "schedule {self:?} does not give strictly positive step sizes"
            )))
        }
    }

    /// Base step size at time `t` (before any per-coordinate scaling).
    pub fn rate(&self, t: u64) -> f64 {
        match *self {
            Schedule::Constant { rate } | Schedule::AdaGrad { rate, .. } => rate,
            Schedule::InverseTime { rate, offset } => rate / (offset + t as f64),
        }
    }
}

/// A schedule plus the state it carries (the AdaGrad accumulator).
#[derive(Debug, Clone)]
pub struct StepSize {
    schedule: Schedule,
    accum: Vec<f64>,
}

impl StepSize {
    pub fn new(schedule: Schedule, dim: usize) -> Result<Self> {
        schedule.validate()?;
        let accum = match schedule {
            Schedule::AdaGrad { .. } => vec![0.0; dim],
            _ => Vec::new(),
        };
        Ok(Self { schedule, accum })
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn rate(&self, t: u64) -> f64 {
        self.schedule.rate(t)
    }

    /// Squared-gradient accumulator, for AdaGrad only.
    pub fn accumulator(&self) -> Option<&[f64]> {
        matches!(self.schedule, Schedule::AdaGrad { .. }).then_some(&self.accum[..])
    }

    /// Displacement along gradient component `g` of coordinate `k` at time
    /// `t`; the caller subtracts it to descend or adds it to ascend.
    /// `rate_t` must be `self.rate(t)`, hoisted out of coordinate loops.
    #[inline]
    pub fn delta(&mut self, rate_t: f64, k: usize, g: f64) -> f64 {
        match self.schedule {
            Schedule::AdaGrad { eps, .. } => {
                let acc = &mut self.accum[k];
                *acc += g * g;
                rate_t * g / (acc.sqrt() + eps)
            }
            _ => rate_t * g,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_time_values() {
        let s = Schedule::InverseTime { rate: 10.0, offset: 5.0 };
        assert_eq!(s.rate(0), 2.0);
        assert_eq!(s.rate(15), 0.5);
    }

    #[test]
    fn rejects_non_positive_schedules() {
        assert!(Schedule::Constant { rate: 0.0 }.validate().is_err());
        assert!(Schedule::InverseTime { rate: 1.0, offset: 0.0 }.validate().is_err());
        assert!(Schedule::AdaGrad { rate: 0.1, eps: -1.0 }.validate().is_err());
        assert!(Schedule::Constant { rate: f64::NAN }.validate().is_err());
    }

    #[test]
    fn adagrad_first_step_is_normalized() {
        let mut s = StepSize::new(Schedule::AdaGrad { rate: 0.1, eps: 0.0 }, 2).unwrap();
        let r = s.rate(0);
        assert!((s.delta(r, 0, -7.0) + 0.1).abs() < 1e-15);
        // second step: 3 / sqrt(49 + 9)
        assert!((s.delta(r, 0, 3.0) - 0.1 * 3.0 / 58f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.accumulator().unwrap(), &[58.0, 0.0]);
    }
}
