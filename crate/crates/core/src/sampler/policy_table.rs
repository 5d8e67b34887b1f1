use std::sync::Arc;

use rand::Rng;

use super::{check_density, check_finite, entropy, shift_normalize, Draw, Sampler};
use crate::math::softmax_into;
use crate::tasks::gridworld::{action_logits, add_log_prob_grad, log_prob, GridWorld, Trajectory, NUM_ACTIONS};
use crate::{Error, Result};

/// Tabular softmax exploration policy over gridworld trajectories.
///
/// The base distribution is the trajectory law of a reference policy
/// `softmax(w)`, so the density of a trajectory is
/// `prod_t pi_tau(a_t | s_t) / prod_t pi_w(a_t | s_t)`.
#[derive(Debug, Clone)]
pub struct PolicyTable {
    world: Arc<GridWorld>,
    tau: Vec<f64>,
    reference: Vec<f64>,
}

impl PolicyTable {
    /// Uniform exploration policy against a uniform reference.
    pub fn uniform(world: Arc<GridWorld>) -> Result<Self> {
        let dim = world.num_params();
        Self::new(world, vec![0.0; dim], vec![0.0; dim])
    }

    pub fn new(world: Arc<GridWorld>, tau: Vec<f64>, reference: Vec<f64>) -> Result<Self> {
        let dim = world.num_params();
        if tau.len() != dim || reference.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "policy tables of length {} and {} for a world with {dim} parameters",
                tau.len(),
                reference.len()
            )));
        }
        check_finite(&reference)?;
        let mut table = Self {
            world,
            tau: Vec::new(),
            reference,
        };
        table.set_tau(&tau)?;
        Ok(table)
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// Replace the reference (target) policy the density is measured against.
    pub fn set_reference(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.reference.len() {
            return Err(Error::DimensionMismatch(format!(
                "reference of length {} for {} parameters",
                w.len(),
                self.reference.len()
            )));
        }
        check_finite(w)?;
        self.reference.copy_from_slice(w);
        Ok(())
    }

    /// Action probabilities at state `s`.
    pub fn action_probs(&self, s: usize) -> [f64; NUM_ACTIONS] {
        let mut p = [0.0; NUM_ACTIONS];
        softmax_into(action_logits(&self.tau, s), &mut p);
        p
    }

    fn check(&self, x: &Trajectory) -> Result<()> {
        let states = self.world.num_states();
        let ok = x.states.len() == x.actions.len()
            && x.states.iter().all(|&s| s < states)
            && x.actions.iter().all(|&a| a < NUM_ACTIONS);
        if ok {
            Ok(())
        } else {
            Err(Error::AtomOutOfRange(format!(
                "trajectory of length {} outside a {}-state world",
                x.actions.len(),
                states
            )))
        }
    }

    fn log_density(&self, x: &Trajectory) -> f64 {
        log_prob(&self.tau, x) - log_prob(&self.reference, x)
    }
}

impl Sampler for PolicyTable {
    type Atom = Trajectory;

    fn tau(&self) -> &[f64] {
        &self.tau
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw<Trajectory>> {
        let sample = self.world.rollout(&self.tau, rng);
        let density = check_density(self.log_density(&sample).exp())?;
        Ok(Draw { sample, density })
    }

    fn density(&self, x: &Trajectory) -> Result<f64> {
        self.check(x)?;
        Ok(self.log_density(x).exp())
    }

    fn score(&self, x: &Trajectory) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut out = vec![0.0; self.tau.len()];
        add_log_prob_grad(&self.tau, x, 1.0, &mut out);
        Ok(out)
    }

    fn score_sum(&self, weighted: &[(Trajectory, f64)]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.tau.len()];
        for (x, c) in weighted {
            self.check(x)?;
            add_log_prob_grad(&self.tau, x, *c, &mut out);
        }
        Ok(out)
    }

    fn set_tau(&mut self, tau: &[f64]) -> Result<()> {
        if tau.len() != self.world.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "tau of length {} for {} parameters",
                tau.len(),
                self.world.num_params()
            )));
        }
        check_finite(tau)?;
        let mut tau = tau.to_vec();
        for block in tau.chunks_mut(NUM_ACTIONS) {
            shift_normalize(block);
        }
        self.tau = tau;
        Ok(())
    }

    fn digest(&self) -> f64 {
        let states = self.world.num_states();
        (0..states).map(|s| entropy(&self.action_probs(s))).sum::<f64>() / states as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::{rng, Stream};

    fn small() -> Arc<GridWorld> {
        Arc::new(GridWorld::with_traps(2, vec![], 0.99, 3).unwrap())
    }

    #[test]
    fn densities_normalize_over_enumerated_trajectories() {
        let world = small();
        let dim = world.num_params();
        let tau: Vec<f64> = (0..dim).map(|k| ((k * 7) as f64 * 0.31).sin()).collect();
        let w: Vec<f64> = (0..dim).map(|k| ((k * 3) as f64 * 0.17).cos()).collect();
        let table = PolicyTable::new(world.clone(), tau, w.clone()).unwrap();
        let total: f64 = world
            .enumerate(10_000)
            .unwrap()
            .iter()
            .map(|x| log_prob(&w, x).exp() * table.density(x).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_density_is_one() {
        let table = PolicyTable::uniform(small()).unwrap();
        let d = table.draw(&mut rng(4, Stream::Sampling)).unwrap();
        assert_eq!(d.density, 1.0);
    }

    #[test]
    fn rows_are_shift_normalized() {
        let world = small();
        let mut table = PolicyTable::uniform(world).unwrap();
        let delta: Vec<f64> = (0..16).map(|k| k as f64).collect();
        table.apply_delta(&delta).unwrap();
        for block in table.tau().chunks(NUM_ACTIONS) {
            assert_eq!(block.iter().copied().fold(f64::NEG_INFINITY, f64::max), 0.0);
        }
    }
}
