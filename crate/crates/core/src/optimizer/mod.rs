//! AW-SGD, the uniform SGD baseline, step-size schedules and the run loop.

mod run;
mod schedule;

pub use run::{run_loop, CsvSink, MetricsSink, NullSink, Optimizer, RunOptions, RunSummary, METRICS_HEADER};
pub use schedule::{Schedule, StepSize};

use std::time::Instant;

use rand::Rng;

use crate::sampler::Sampler;
use crate::tasks::{SparseGrad, Task};
use crate::{Error, Result};

/// `tau` steps are skipped for samples whose `|d|^2` exceeds this.
pub const DEFAULT_GRAD_NORM_GUARD: f64 = 1e12;

/// Enumeration budget for [`variance_trace`].
pub const DEFAULT_ATOM_BUDGET: u128 = 1_000_000;

/// Model parameters `w` with their step-size state.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub w: Vec<f64>,
    rho: StepSize,
    samples: u64,
}

impl ModelState {
    pub fn new(w: Vec<f64>, rho: Schedule) -> Result<Self> {
        let rho = StepSize::new(rho, w.len())?;
        Ok(Self { w, rho, samples: 0 })
    }

    pub fn rho(&self) -> &StepSize {
        &self.rho
    }

    /// Samples consumed by `w` updates so far. Schedules are indexed by it.
    pub fn samples(&self) -> u64 {
        self.samples
    }
}

/// Telemetry for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    /// Samples consumed by `w` updates, including this step's.
    pub samples: u64,
    /// Mean `f(x_b; w_t)` over the batch.
    pub loss: f64,
    /// Mean `|d_b|^2` over the batch.
    pub d_norm_sq: f64,
    /// Mean density `q(x_b; tau_t)` over the batch.
    pub density: f64,
    pub tau_norm: f64,
    pub tau_digest: f64,
    /// Summed per-sample elapsed seconds, for time-aware runs.
    pub elapsed: Option<f64>,
}

/// Reusable buffers for accumulating a batch of sparse gradients.
#[derive(Debug, Clone, Default)]
struct Accumulator {
    dense: Vec<f64>,
    touched: Vec<usize>,
    grad: SparseGrad,
}

impl Accumulator {
    fn ensure(&mut self, dim: usize) {
        if self.dense.len() != dim {
            self.dense = vec![0.0; dim];
            self.touched.clear();
        }
    }

    #[inline]
    fn add(&mut self, k: usize, v: f64) {
        self.touched.push(k);
        self.dense[k] += v;
    }

    /// `w_k -= rho_k(acc_k)` over touched coordinates, then reset.
    fn apply(&mut self, model: &mut ModelState) -> Result<()> {
        let rate = model.rho.rate(model.samples);
        self.touched.sort_unstable();
        self.touched.dedup();
        let mut next = Vec::with_capacity(self.touched.len());
        for &k in &self.touched {
            let g = self.dense[k];
            let v = if g != 0.0 { model.w[k] - model.rho.delta(rate, k, g) } else { model.w[k] };
            if !v.is_finite() {
                self.reset();
                return Err(Error::NonFiniteUpdate("model parameters"));
            }
            next.push(v);
        }
        for (&k, v) in self.touched.iter().zip(next) {
            model.w[k] = v;
        }
        self.reset();
        Ok(())
    }

    fn reset(&mut self) {
        for &k in &self.touched {
            self.dense[k] = 0.0;
        }
        self.touched.clear();
    }
}

/// Uniform-sampling SGD: draws `batch` atoms from `P` and steps along the
/// mean gradient.
#[derive(Debug, Clone, Default)]
pub struct Sgd {
    batch: usize,
    acc: Accumulator,
    t: u64,
}

impl Sgd {
    pub fn new(batch: usize) -> Result<Self> {
        if batch == 0 {
            return Err(Error::InvalidArgument("batch size 0".into()));
        }
        Ok(Self {
            batch,
            ..Self::default()
        })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn step<T: Task, R: Rng + ?Sized>(&mut self, task: &T, model: &mut ModelState, rng: &mut R) -> Result<StepRecord> {
        self.acc.ensure(task.dim());
        let inv_b = 1.0 / self.batch as f64;
        let mut loss = 0.0;
        let mut d_norm_sq = 0.0;
        for _ in 0..self.batch {
            let x = task.draw_base(rng);
            loss += task.grad(&model.w, &x, &mut self.acc.grad);
            d_norm_sq += self.acc.grad.norm_sq();
            for i in 0..self.acc.grad.len() {
                let (k, g) = (self.acc.grad.idx[i], self.acc.grad.val[i]);
                self.acc.add(k, g * inv_b);
            }
        }
        self.acc.apply(model)?;
        model.samples += self.batch as u64;
        let t = self.t;
        self.t += 1;
        Ok(StepRecord {
            t,
            samples: model.samples,
            loss: loss * inv_b,
            d_norm_sq: d_norm_sq * inv_b,
            density: 1.0,
            tau_norm: 0.0,
            tau_digest: f64::NAN,
            elapsed: None,
        })
    }
}

/// Per-sample elapsed times for a batch, given the atoms and the wall time
/// spent drawing them and updating `w`.
pub trait Elapsed<A> {
    fn elapsed(&mut self, atoms: &[A], wall_seconds: f64, out: &mut Vec<f64>);
}

/// Adaptive weighted SGD.
///
/// Each iteration draws `batch` atoms from `Q_tau`, steps `w` along the mean
/// of `d_b = grad f(x_b) / q(x_b)`, then moves `tau` along
/// `eta * sum_b |d_b|^2 / B * grad_tau log q(x_b)`. Both updates read the
/// pre-step parameters. With `eta = None` the sampler is frozen.
#[derive(Debug, Clone)]
pub struct AwSgd<S: Sampler> {
    sampler: S,
    eta: Option<StepSize>,
    batch: usize,
    inner_steps: usize,
    grad_norm_guard: f64,
    acc: Accumulator,
    t: u64,
    tau_samples: u64,
    skipped_tau_samples: u64,
}

impl<S: Sampler> AwSgd<S> {
    pub fn new(sampler: S, eta: Option<Schedule>, batch: usize) -> Result<Self> {
        if batch == 0 {
            return Err(Error::InvalidArgument("batch size 0".into()));
        }
        let dim = sampler.tau().len();
        let eta = eta.map(|e| StepSize::new(e, dim)).transpose()?;
        Ok(Self {
            sampler,
            eta,
            batch,
            inner_steps: 1,
            grad_norm_guard: DEFAULT_GRAD_NORM_GUARD,
            acc: Accumulator::default(),
            t: 0,
            tau_samples: 0,
            skipped_tau_samples: 0,
        })
    }

    pub fn with_inner_steps(mut self, inner_steps: usize) -> Result<Self> {
        if inner_steps == 0 {
            return Err(Error::InvalidArgument("inner steps must be at least 1".into()));
        }
        self.inner_steps = inner_steps;
        Ok(self)
    }

    pub fn with_grad_norm_guard(mut self, guard: f64) -> Self {
        self.grad_norm_guard = guard;
        self
    }

    pub fn sampler(&self) -> &S {
        &self.sampler
    }

    pub fn sampler_mut(&mut self) -> &mut S {
        &mut self.sampler
    }

    pub fn into_sampler(self) -> S {
        self.sampler
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn eta(&self) -> Option<&StepSize> {
        self.eta.as_ref()
    }

    /// Samples dropped from `tau` steps by the gradient-norm guard.
    pub fn skipped_tau_samples(&self) -> u64 {
        self.skipped_tau_samples
    }

    pub fn step<T, R>(&mut self, task: &T, model: &mut ModelState, rng: &mut R) -> Result<StepRecord>
    where
        T: Task<Atom = S::Atom>,
        R: Rng + ?Sized,
    {
        self.step_timed(task, model, rng, None::<&mut NoClock>)
    }

    /// One iteration. When `clock` is given, each sample's `tau`
    /// coefficient is divided by its elapsed time.
    pub fn step_timed<T, R, C>(
        &mut self,
        task: &T,
        model: &mut ModelState,
        rng: &mut R,
        clock: Option<&mut C>,
    ) -> Result<StepRecord>
    where
        T: Task<Atom = S::Atom>,
        R: Rng + ?Sized,
        C: Elapsed<S::Atom> + ?Sized,
    {
        let started = clock.as_ref().map(|_| Instant::now());
        self.acc.ensure(task.dim());
        let inv_b = 1.0 / self.batch as f64;
        let mut loss = 0.0;
        let mut density = 0.0;
        let mut d_norm_sq = 0.0;
        let mut atoms = Vec::with_capacity(self.batch);
        let mut norms = Vec::with_capacity(self.batch);
        for _ in 0..self.batch {
            let draw = self.sampler.draw(rng)?;
            let q = draw.density;
            loss += task.grad(&model.w, &draw.sample, &mut self.acc.grad);
            let g_sq = self.acc.grad.norm_sq();
            let n_sq = g_sq / (q * q);
            for i in 0..self.acc.grad.len() {
                let (k, g) = (self.acc.grad.idx[i], self.acc.grad.val[i]);
                self.acc.add(k, g / q * inv_b);
            }
            density += q;
            d_norm_sq += n_sq;
            atoms.push(draw.sample);
            norms.push(n_sq);
        }
        self.acc.apply(model)?;
        model.samples += self.batch as u64;

        let mut elapsed_total = None;
        if let Some(clock) = clock {
            let wall = started.map_or(0.0, |s| s.elapsed().as_secs_f64());
            let mut elapsed = Vec::with_capacity(self.batch);
            clock.elapsed(&atoms, wall, &mut elapsed);
            let coefs: Vec<f64> = norms.iter().zip(&elapsed).map(|(c, e)| c / e).collect();
            elapsed_total = Some(elapsed.iter().sum());
            self.tau_step(&atoms, &norms, &coefs)?;
        } else {
            self.tau_step(&atoms, &norms, &norms)?;
        }

        for _ in 1..self.inner_steps {
            self.sampler_step(task, &model.w, rng)?;
        }

        let t = self.t;
        self.t += 1;
        Ok(StepRecord {
            t,
            samples: model.samples,
            loss: loss * inv_b,
            d_norm_sq: d_norm_sq * inv_b,
            density: density * inv_b,
            tau_norm: crate::math::norm_sq(self.sampler.tau()).sqrt(),
            tau_digest: self.sampler.digest(),
            elapsed: elapsed_total,
        })
    }

    /// A `tau` update from a fresh batch at fixed `w`, leaving `w` alone.
    pub fn sampler_step<T, R>(&mut self, task: &T, w: &[f64], rng: &mut R) -> Result<()>
    where
        T: Task<Atom = S::Atom>,
        R: Rng + ?Sized,
    {
        let mut atoms = Vec::with_capacity(self.batch);
        let mut norms = Vec::with_capacity(self.batch);
        for _ in 0..self.batch {
            let draw = self.sampler.draw(rng)?;
            task.grad(w, &draw.sample, &mut self.acc.grad);
            norms.push(self.acc.grad.norm_sq() / (draw.density * draw.density));
            atoms.push(draw.sample);
        }
        self.tau_step(&atoms, &norms, &norms)
    }

    /// `tau += eta * sum_b c_b / B * score(x_b)` where `c_b` is `|d_b|^2`,
    /// divided by the elapsed time in the time-aware variant. Samples whose
    /// `|d_b|^2` exceeds the guard are left out.
    fn tau_step(&mut self, atoms: &[S::Atom], norms: &[f64], coefs: &[f64]) -> Result<()> {
        let Some(eta) = self.eta.as_mut() else {
            return Ok(());
        };
        let inv_b = 1.0 / self.batch as f64;
        let mut weighted = Vec::with_capacity(atoms.len());
        for ((x, &n), &c) in atoms.iter().zip(norms).zip(coefs) {
            if n <= self.grad_norm_guard && c.is_finite() {
                weighted.push((x.clone(), c * inv_b));
            } else {
                self.skipped_tau_samples += 1;
                log::warn!("|d|^2 = {n:e} above guard, sample dropped from the sampler step");
            }
        }
        let t = self.tau_samples;
        self.tau_samples += atoms.len() as u64;
        if weighted.is_empty() {
            return Ok(());
        }
        let grad = self.sampler.score_sum(&weighted)?;
        let rate = eta.rate(t);
        let delta: Vec<f64> = grad
            .iter()
            .enumerate()
            .map(|(k, &g)| if g != 0.0 { eta.delta(rate, k, g) } else { 0.0 })
            .collect();
        self.sampler.apply_delta(&delta)
    }
}

/// Placeholder clock type for untimed steps.
pub enum NoClock {}

impl<A> Elapsed<A> for NoClock {
    fn elapsed(&mut self, _: &[A], _: f64, _: &mut Vec<f64>) {
        match *self {}
    }
}

/// Full-batch gradient `sum_x P(x) grad f(x; w)` by enumeration.
pub fn full_gradient<T: Task>(task: &T, w: &[f64], budget: u128) -> Result<Vec<f64>> {
    check_budget(task.num_atoms(), budget)?;
    let p = 1.0 / task.num_atoms() as f64;
    let mut out = vec![0.0; task.dim()];
    let mut g = SparseGrad::new();
    for x in task.atoms() {
        task.grad(w, &x, &mut g);
        for (&k, &v) in g.idx.iter().zip(&g.val) {
            out[k] += p * v;
        }
    }
    Ok(out)
}

/// `E_{Q_tau}[|grad f / q|^2] = sum_x P(x) |grad f(x; w)|^2 / q(x; tau)`,
/// computed exactly by enumerating the sample space.
pub fn variance_trace<T, S>(task: &T, w: &[f64], sampler: &S, budget: u128) -> Result<f64>
where
    T: Task,
    S: Sampler<Atom = T::Atom>,
{
    check_budget(task.num_atoms(), budget)?;
    let p = 1.0 / task.num_atoms() as f64;
    let mut g = SparseGrad::new();
    let mut total = 0.0;
    for x in task.atoms() {
        task.grad(w, &x, &mut g);
        total += p * g.norm_sq() / sampler.density(&x)?;
    }
    Ok(total)
}

fn check_budget(atoms: u128, budget: u128) -> Result<()> {
    if atoms > budget {
        Err(Error::SpaceTooLarge { atoms, budget })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;
    use crate::sampler::SoftmaxProduct;
    use crate::seeding::{rng, Stream};
    use crate::tasks::MatFac;

    fn two_by_two() -> MatFac {
        MatFac::new(Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap(), 1).unwrap()
    }

    #[test]
    fn hand_computed_step() {
        let task = two_by_two();
        let mut model = ModelState::new(vec![1.0; 4], Schedule::Constant { rate: 0.1 }).unwrap();
        let mut g = SparseGrad::new();
        task.grad(&model.w, &(0, 1), &mut g);
        let mut acc = Accumulator::default();
        acc.ensure(4);
        for (&k, &v) in g.idx.iter().zip(&g.val) {
            acc.add(k, v);
        }
        acc.apply(&mut model).unwrap();
        // layout: u0, u1, v0, v1; s = 1 - 2 = -1, so both gradients are -2
        assert_eq!(g.to_dense(4), vec![-2.0, 0.0, 0.0, -2.0]);
        assert!((model.w[0] - 1.2).abs() < 1e-15);
        assert!((model.w[3] - 1.2).abs() < 1e-15);
        assert_eq!(model.w[1], 1.0);
        assert_eq!(model.w[2], 1.0);
    }

    #[test]
    fn zero_steps_keep_model() {
        let task = two_by_two();
        let w = task.params_from_factors(
            &Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap(),
            &Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap(),
        )
        .unwrap();
        let mut model = ModelState::new(w.clone(), Schedule::Constant { rate: 0.5 }).unwrap();
        let mut sgd = Sgd::new(3).unwrap();
        let mut r = rng(1, Stream::Sampling);
        for _ in 0..10 {
            sgd.step(&task, &mut model, &mut r).unwrap();
        }
        assert_eq!(model.w, w);
    }

    #[test]
    fn budget_is_enforced() {
        let task = two_by_two();
        let s = SoftmaxProduct::uniform(2, 2).unwrap();
        assert!(matches!(
            variance_trace(&task, &[0.0; 4], &s, 3),
            Err(Error::SpaceTooLarge { atoms: 4, budget: 3 })
        ));
    }

    #[test]
    fn non_finite_update_aborts() {
        let task = two_by_two();
        let mut model = ModelState::new(vec![1e200; 4], Schedule::Constant { rate: 1e200 }).unwrap();
        let mut sgd = Sgd::new(1).unwrap();
        let err = sgd.step(&task, &mut model, &mut rng(1, Stream::Sampling)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteUpdate(_)));
        assert_eq!(model.w, vec![1e200; 4]);
    }
}
