//! Episodic gridworld with tabular softmax policies, trained on-policy
//! (REINFORCE) or off-policy from a learned exploration policy.
//!
//! Reward convention: every move costs -1; arriving on the goal adds +1000
//! and arriving on a trap adds -1000, both ending the episode. The return is
//! `sum_t gamma^t r_{t+1}` over at most `t_max` moves.

use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::math::{log_sum_exp, norm_sq, softmax_into};
use crate::optimizer::{Schedule, StepSize};
use crate::sampler::{PolicyTable, Sampler};
use crate::{Error, Result};

pub const NUM_ACTIONS: usize = 4;

/// Action indices: up, right, down, left.
pub const UP: usize = 0;
pub const RIGHT: usize = 1;
pub const DOWN: usize = 2;
pub const LEFT: usize = 3;

pub const STEP_REWARD: f64 = -1.0;
pub const GOAL_REWARD: f64 = 1000.0;
pub const TRAP_REWARD: f64 = -1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Goal,
    Trap,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub terminal: Terminal,
    pub return_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Square grid, start at the top-left cell, goal at the bottom-right cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    side: usize,
    traps: Vec<usize>,
    gamma: f64,
    t_max: usize,
}

impl GridWorld {
    /// `max(1, side / 25)` traps placed uniformly at random.
    pub fn default_trap_count(side: usize) -> usize {
        (side / 25).max(1)
    }

    /// Episode cap used when none is given: `4 * side^2`.
    pub fn default_horizon(side: usize) -> usize {
        4 * side * side
    }

    /// World with [`Self::default_trap_count`] traps drawn with `rng`,
    /// never on the start or goal cell.
    pub fn new<R: Rng + ?Sized>(side: usize, gamma: f64, t_max: usize, rng: &mut R) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidArgument(format!("grid side {side} < 2")));
        }
        let cells = side * side;
        let count = Self::default_trap_count(side).min(cells - 2);
        // interior candidates are 1..cells-1
        let traps = sample_indices(rng, cells - 2, count)
            .into_iter()
            .map(|k| k + 1)
            .collect();
        Self::with_traps(side, traps, gamma, t_max)
    }

    pub fn with_traps(side: usize, mut traps: Vec<usize>, gamma: f64, t_max: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidArgument(format!("grid side {side} < 2")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("discount {gamma} outside (0, 1]")));
        }
        let cells = side * side;
        traps.sort_unstable();
        traps.dedup();
        if let Some(&bad) = traps.iter().find(|&&t| t == 0 || t >= cells - 1) {
            return Err(Error::InvalidArgument(format!(
                "trap cell {bad} collides with start/goal or lies off the grid"
            )));
        }
        Ok(Self {
            side,
            traps,
            gamma,
            t_max,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn num_states(&self) -> usize {
        self.side * self.side
    }

    /// Length of a policy logit table.
    pub fn num_params(&self) -> usize {
        self.num_states() * NUM_ACTIONS
    }

    pub fn start(&self) -> usize {
        0
    }

    pub fn goal(&self) -> usize {
        self.num_states() - 1
    }

    pub fn traps(&self) -> &[usize] {
        &self.traps
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    /// Moves off the grid leave the position unchanged.
    pub fn next_state(&self, s: usize, a: usize) -> usize {
        let (r, c) = (s / self.side, s % self.side);
        let (r, c) = match a {
            UP => (r.saturating_sub(1), c),
            RIGHT => (r, (c + 1).min(self.side - 1)),
            DOWN => ((r + 1).min(self.side - 1), c),
            LEFT => (r, c.saturating_sub(1)),
            _ => panic!("action {a} out of range"),
        };
        r * self.side + c
    }

    fn arrive(&self, s: usize) -> (f64, Option<Terminal>) {
        if s == self.goal() {
            (STEP_REWARD + GOAL_REWARD, Some(Terminal::Goal))
        } else if self.traps.binary_search(&s).is_ok() {
            (STEP_REWARD + TRAP_REWARD, Some(Terminal::Trap))
        } else {
            (STEP_REWARD, None)
        }
    }

    /// Simulates one episode with actions drawn from `softmax(logits[s])`.
    pub fn rollout<R: Rng + ?Sized>(&self, logits: &[f64], rng: &mut R) -> Trajectory {
        debug_assert_eq!(logits.len(), self.num_params());
        let mut states = Vec::new();
        let mut actions = Vec::new();
        let mut rewards = Vec::new();
        let mut terminal = Terminal::Timeout;
        let mut ret = 0.0;
        let mut discount = 1.0;
        let mut s = self.start();
        for _ in 0..self.t_max {
            let a = sample_action(action_logits(logits, s), rng.random());
            let next = self.next_state(s, a);
            let (r, end) = self.arrive(next);
            states.push(s);
            actions.push(a);
            rewards.push(r);
            ret += discount * r;
            discount *= self.gamma;
            s = next;
            if let Some(end) = end {
                terminal = end;
                break;
            }
        }
        Trajectory {
            states,
            actions,
            rewards,
            terminal,
            return_value: ret,
        }
    }

    /// Every distinct episode (action sequence up to termination or
    /// `t_max`). Fails once more than `budget` episodes have been produced.
    pub fn enumerate(&self, budget: u128) -> Result<Vec<Trajectory>> {
        let mut out = Vec::new();
        let mut prefix = Trajectory {
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            terminal: Terminal::Timeout,
            return_value: 0.0,
        };
        self.enumerate_from(self.start(), 1.0, &mut prefix, &mut out, budget)?;
        Ok(out)
    }

    fn enumerate_from(
        &self,
        s: usize,
        discount: f64,
        prefix: &mut Trajectory,
        out: &mut Vec<Trajectory>,
        budget: u128,
    ) -> Result<()> {
        if prefix.len() == self.t_max {
            let mut t = prefix.clone();
            t.terminal = Terminal::Timeout;
            return push_bounded(out, t, budget);
        }
        for a in 0..NUM_ACTIONS {
            let next = self.next_state(s, a);
            let (r, end) = self.arrive(next);
            prefix.states.push(s);
            prefix.actions.push(a);
            prefix.rewards.push(r);
            let saved = prefix.return_value;
            prefix.return_value += discount * r;
            if let Some(end) = end {
                let mut t = prefix.clone();
                t.terminal = end;
                push_bounded(out, t, budget)?;
            } else {
                self.enumerate_from(next, discount * self.gamma, prefix, out, budget)?;
            }
            prefix.return_value = saved;
            prefix.states.pop();
            prefix.actions.pop();
            prefix.rewards.pop();
        }
        Ok(())
    }

    /// Fraction of `rollouts` episodes under `softmax(logits)` that reach the
    /// goal.
    pub fn success_probability<R: Rng + ?Sized>(&self, logits: &[f64], rollouts: usize, rng: &mut R) -> f64 {
        if rollouts == 0 {
            return 0.0;
        }
        let hits = (0..rollouts)
            .filter(|_| self.rollout(logits, rng).terminal == Terminal::Goal)
            .count();
        hits as f64 / rollouts as f64
    }
}

fn push_bounded(out: &mut Vec<Trajectory>, t: Trajectory, budget: u128) -> Result<()> {
    if out.len() as u128 >= budget {
        return Err(Error::SpaceTooLarge {
            atoms: out.len() as u128 + 1,
            budget,
        });
    }
    out.push(t);
    Ok(())
}

#[inline]
pub fn action_logits(logits: &[f64], s: usize) -> &[f64] {
    &logits[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS]
}

fn sample_action(logits: &[f64], u: f64) -> usize {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cdf = [0.0; NUM_ACTIONS];
    let mut acc = 0.0;
    for (c, z) in cdf.iter_mut().zip(logits) {
        acc += (z - max).exp();
        *c = acc;
    }
    let target = u * acc;
    cdf.iter().position(|&c| c > target).unwrap_or(NUM_ACTIONS - 1)
}

/// `log prod_t pi(a_t | s_t)` under `softmax(logits)`.
pub fn log_prob(logits: &[f64], traj: &Trajectory) -> f64 {
    traj.states
        .iter()
        .zip(&traj.actions)
        .map(|(&s, &a)| {
            let z = action_logits(logits, s);
            z[a] - log_sum_exp(z)
        })
        .sum()
}

/// Adds `coef * sum_t (e_{a_t} - pi(. | s_t))` into `out`.
pub fn add_log_prob_grad(logits: &[f64], traj: &Trajectory, coef: f64, out: &mut [f64]) {
    let mut probs = [0.0; NUM_ACTIONS];
    for (&s, &a) in traj.states.iter().zip(&traj.actions) {
        softmax_into(action_logits(logits, s), &mut probs);
        let base = s * NUM_ACTIONS;
        for (k, p) in probs.iter().enumerate() {
            out[base + k] -= coef * p;
        }
        out[base + a] += coef;
    }
}

/// Density-weighted policy gradient of `f = -return` for a trajectory drawn
/// from the behaviour policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradient {
    /// `-w * R * sum_t grad log pi_target(a_t | s_t)`, dense over the table.
    pub d: Vec<f64>,
    /// `log p_target(traj) - log q_behavior(traj)`.
    pub log_ratio: f64,
    /// `exp(log_ratio)`.
    pub weight: f64,
}

pub fn policy_gradient(
    target: &[f64],
    behavior: &[f64],
    traj: &Trajectory,
    weight_cap: f64,
) -> Result<PolicyGradient> {
    let log_ratio = log_prob(target, traj) - log_prob(behavior, traj);
    let weight = log_ratio.exp();
    if !(weight <= weight_cap) {
        return Err(Error::WeightOverflow(weight));
    }
    let mut d = vec![0.0; target.len()];
    let coef = -weight * traj.return_value;
    if coef != 0.0 {
        add_log_prob_grad(target, traj, coef, &mut d);
    }
    Ok(PolicyGradient {
        d,
        log_ratio,
        weight,
    })
}

/// One training episode's telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// `f = -return` of the sampled trajectory.
    pub loss: f64,
    pub d_norm_sq: f64,
    /// Behaviour-to-target trajectory density `q = 1 / weight`.
    pub density: f64,
    pub tau_norm: f64,
    pub tau_digest: f64,
    pub terminal: Terminal,
    /// The update was dropped because the importance weight exceeded the cap.
    pub skipped: bool,
}

/// Policy-gradient trainer for a target policy `w`.
///
/// Without an exploration policy it runs on-policy REINFORCE. With one, it
/// runs AW-SGD over trajectories: episodes come from the exploration policy
/// `Q_tau`, the target step is reweighted by `p_w / q_tau`, and `tau` follows
/// `+eta * |d|^2 * grad_tau log q_tau`.
#[derive(Debug, Clone)]
pub struct PolicyTrainer {
    world: Arc<GridWorld>,
    w: Vec<f64>,
    rho: StepSize,
    explore: Option<(PolicyTable, StepSize)>,
    weight_cap: f64,
    grad_norm_guard: f64,
    episodes: u64,
    skipped_updates: u64,
    skipped_tau_steps: u64,
}

pub const DEFAULT_WEIGHT_CAP: f64 = 1e6;
pub const DEFAULT_GRAD_NORM_GUARD: f64 = 1e12;

impl PolicyTrainer {
    /// On-policy REINFORCE from a uniform target policy.
    pub fn on_policy(world: Arc<GridWorld>, rho: Schedule) -> Result<Self> {
        let dim = world.num_params();
        Ok(Self {
            w: vec![0.0; dim],
            rho: StepSize::new(rho, dim)?,
            explore: None,
            weight_cap: DEFAULT_WEIGHT_CAP,
            grad_norm_guard: DEFAULT_GRAD_NORM_GUARD,
            episodes: 0,
            skipped_updates: 0,
            skipped_tau_steps: 0,
            world,
        })
    }

    /// Off-policy AW-SGD from uniform target and exploration policies.
    pub fn adaptive(world: Arc<GridWorld>, rho: Schedule, eta: Schedule) -> Result<Self> {
        let mut t = Self::on_policy(world.clone(), rho)?;
        let dim = world.num_params();
        t.explore = Some((PolicyTable::uniform(world)?, StepSize::new(eta, dim)?));
        Ok(t)
    }

    pub fn with_weight_cap(mut self, cap: f64) -> Self {
        self.weight_cap = cap;
        self
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    pub fn target(&self) -> &[f64] {
        &self.w
    }

    pub fn exploration(&self) -> Option<&PolicyTable> {
        self.explore.as_ref().map(|(p, _)| p)
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn skipped_updates(&self) -> u64 {
        self.skipped_updates
    }

    pub fn skipped_tau_steps(&self) -> u64 {
        self.skipped_tau_steps
    }

    pub fn episode<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<EpisodeRecord> {
        let t = self.episodes;
        self.episodes += 1;
        let world = self.world.clone();
        let behavior: &[f64] = match &self.explore {
            Some((p, _)) => p.tau(),
            None => &self.w,
        };
        let traj = world.rollout(behavior, rng);
        let pg = match policy_gradient(&self.w, behavior, &traj, self.weight_cap) {
            Ok(pg) => pg,
            Err(Error::WeightOverflow(weight)) => {
                self.skipped_updates += 1;
                return Ok(EpisodeRecord {
                    episode: t,
                    loss: -traj.return_value,
                    d_norm_sq: f64::NAN,
                    density: 1.0 / weight,
                    tau_norm: self.tau_norm(),
                    tau_digest: self.tau_digest(),
                    terminal: traj.terminal,
                    skipped: true,
                });
            }
            Err(e) => return Err(e),
        };
        let d_norm_sq = norm_sq(&pg.d);

        let rate = self.rho.rate(t);
        let mut next_w = self.w.clone();
        for (k, &g) in pg.d.iter().enumerate() {
            if g != 0.0 {
                next_w[k] -= self.rho.delta(rate, k, g);
            }
        }
        if next_w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteUpdate("target policy"));
        }

        if let Some((table, eta)) = &mut self.explore {
            if d_norm_sq <= self.grad_norm_guard {
                let mut score = vec![0.0; table.tau().len()];
                add_log_prob_grad(table.tau(), &traj, d_norm_sq, &mut score);
                let rate = eta.rate(t);
                let delta: Vec<f64> = score
                    .iter()
                    .enumerate()
                    .map(|(k, &g)| if g != 0.0 { eta.delta(rate, k, g) } else { 0.0 })
                    .collect();
                table.apply_delta(&delta)?;
            } else {
                self.skipped_tau_steps += 1;
                log::warn!("episode {t}: |d|^2 = {d_norm_sq:e} above guard, exploration step skipped");
            }
        }
        self.w = next_w;
        if let Some((table, _)) = &mut self.explore {
            table.set_reference(&self.w)?;
        }

        Ok(EpisodeRecord {
            episode: t,
            loss: -traj.return_value,
            d_norm_sq,
            density: 1.0 / pg.weight,
            tau_norm: self.tau_norm(),
            tau_digest: self.tau_digest(),
            terminal: traj.terminal,
            skipped: false,
        })
    }

    fn tau_norm(&self) -> f64 {
        self.exploration().map_or(0.0, |p| norm_sq(p.tau()).sqrt())
    }

    fn tau_digest(&self) -> f64 {
        self.exploration().map_or(f64::NAN, |p| p.digest())
    }

    /// Goal-reaching frequency of the target policy over `rollouts` episodes.
    pub fn success_probability<R: Rng + ?Sized>(&self, rollouts: usize, rng: &mut R) -> f64 {
        self.world.success_probability(&self.w, rollouts, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::{rng, Stream};

    fn open_world(side: usize, t_max: usize) -> GridWorld {
        GridWorld::with_traps(side, vec![], 0.99, t_max).unwrap()
    }

    #[test]
    fn walls_keep_position() {
        let w = open_world(3, 10);
        assert_eq!(w.next_state(0, UP), 0);
        assert_eq!(w.next_state(0, LEFT), 0);
        assert_eq!(w.next_state(2, RIGHT), 2);
        assert_eq!(w.next_state(8, DOWN), 8);
        assert_eq!(w.next_state(4, UP), 1);
        assert_eq!(w.next_state(4, LEFT), 3);
    }

    #[test]
    fn deterministic_right_then_down() {
        let w = open_world(2, 8);
        let mut logits = vec![-20.0; w.num_params()];
        logits[RIGHT] = 20.0; // state 0
        logits[NUM_ACTIONS + DOWN] = 20.0; // state 1
        let traj = w.rollout(&logits, &mut rng(1, Stream::Sampling));
        assert_eq!(traj.actions, vec![RIGHT, DOWN]);
        assert_eq!(traj.terminal, Terminal::Goal);
        let expected = -1.0 + 0.99 * (-1.0 + 1000.0);
        assert!((traj.return_value - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_horizon_is_an_empty_timeout() {
        let w = open_world(2, 0);
        let traj = w.rollout(&vec![0.0; w.num_params()], &mut rng(1, Stream::Sampling));
        assert!(traj.is_empty());
        assert_eq!(traj.terminal, Terminal::Timeout);
        assert_eq!(traj.return_value, 0.0);
        let pg = policy_gradient(&[0.3; 16], &[0.0; 16], &traj, 1e6).unwrap();
        assert!(pg.d.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn trap_placement_rules() {
        for side in [2, 3, 15, 50, 80] {
            let w = GridWorld::new(side, 0.99, 10, &mut rng(side as u64, Stream::Data)).unwrap();
            assert_eq!(w.traps().len(), GridWorld::default_trap_count(side));
            assert!(w.traps().iter().all(|&t| t != w.start() && t != w.goal()));
        }
        assert_eq!(GridWorld::default_trap_count(15), 1);
        assert_eq!(GridWorld::default_trap_count(50), 2);
        assert!(GridWorld::with_traps(3, vec![8], 0.99, 5).is_err());
        assert!(GridWorld::with_traps(3, vec![0], 0.99, 5).is_err());
    }

    #[test]
    fn episodes_respect_horizon() {
        let w = GridWorld::new(6, 0.99, 7, &mut rng(3, Stream::Data)).unwrap();
        let logits = vec![0.0; w.num_params()];
        let mut r = rng(3, Stream::Sampling);
        for _ in 0..500 {
            let t = w.rollout(&logits, &mut r);
            assert!(t.len() <= 7);
            assert!(t.return_value.is_finite());
        }
    }

    #[test]
    fn on_policy_weight_is_one() {
        let w = GridWorld::new(4, 0.9, 20, &mut rng(2, Stream::Data)).unwrap();
        let logits: Vec<f64> = (0..w.num_params()).map(|k| (k as f64 * 0.37).sin()).collect();
        let traj = w.rollout(&logits, &mut rng(2, Stream::Sampling));
        let pg = policy_gradient(&logits, &logits, &traj, 1e6).unwrap();
        assert_eq!(pg.weight, 1.0);
        assert_eq!(pg.log_ratio, 0.0);
    }

    #[test]
    fn weight_cap_is_enforced() {
        let w = open_world(2, 4);
        let mut target = vec![0.0; w.num_params()];
        target[RIGHT] = 30.0;
        let traj = w.rollout(&target, &mut rng(5, Stream::Sampling));
        let behavior = vec![0.0; w.num_params()];
        // the target assigns far more probability to this path than uniform
        assert!(matches!(
            policy_gradient(&target, &behavior, &traj, 1.0),
            Err(Error::WeightOverflow(_))
        ));
    }

    #[test]
    fn enumeration_budget() {
        let w = open_world(2, 3);
        assert!(w.enumerate(10_000).is_ok());
        assert!(matches!(w.enumerate(5), Err(Error::SpaceTooLarge { .. })));
    }
}
