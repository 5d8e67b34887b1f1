//! Time-aware AW-SGD and the simulated access-cost model.
//!
//! The sampler step is divided by the time each sample took to fetch and
//! process, so `tau` learns variance reduction per second rather than per
//! sample. Slow data ends up sampled less often unless it is worth the wait.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{low_rank, LowRankSpec};
use crate::optimizer::{AwSgd, Elapsed, ModelState, Optimizer, Schedule, Sgd, StepRecord};
use crate::sampler::{Sampler, SoftmaxProduct};
use crate::seeding::{rng, Stream};
use crate::tasks::{MatFac, Task};
use crate::{Error, Result};

/// Default simulated cost of one fast access, in seconds.
pub const BASE_ACCESS_SECONDS: f64 = 1e-7;

/// How the per-sample compute share of elapsed time is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ComputeTime {
    /// Measured wall time of the step, split evenly over the batch.
    Measured,
    /// A fixed number of seconds per sample.
    Modeled { seconds: f64 },
}

/// Source of per-sample elapsed times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AccessClock {
    /// Measured wall time only.
    Wall,
    /// `base_seconds` per access, times `slow_factor` for rows at or after
    /// `slow_from_row`, plus the compute share.
    Simulated {
        base_seconds: f64,
        slow_factor: f64,
        slow_from_row: usize,
        compute: ComputeTime,
    },
    /// The same duration for every sample.
    Fixed { seconds: f64 },
}

impl AccessClock {
    /// Simulated clock with the slow half starting at row `n / 2`.
    pub fn half_slow(n: usize, slow_factor: f64, compute: ComputeTime) -> Self {
        AccessClock::Simulated {
            base_seconds: BASE_ACCESS_SECONDS,
            slow_factor,
            slow_from_row: n / 2,
            compute,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AccessClock::Wall => true,
            AccessClock::Simulated {
                base_seconds,
                slow_factor,
                compute,
                ..
            } => {
                base_seconds > 0.0
                    && base_seconds.is_finite()
                    && slow_factor > 0.0
                    && slow_factor.is_finite()
                    && match compute {
                        ComputeTime::Measured => true,
                        ComputeTime::Modeled { seconds } => seconds >= 0.0 && seconds.is_finite(),
                    }
            }
            AccessClock::Fixed { seconds } => seconds > 0.0 && seconds.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("clock {self:?} can report non-positive times")))
        }
    }

    /// Simulated access cost of `row`; zero for wall clocks.
    pub fn access_seconds(&self, row: usize) -> f64 {
        match *self {
            AccessClock::Simulated {
                base_seconds,
                slow_factor,
                slow_from_row,
                ..
            } => {
                if row >= slow_from_row {
                    base_seconds * slow_factor
                } else {
                    base_seconds
                }
            }
            AccessClock::Fixed { seconds } => seconds,
            AccessClock::Wall => 0.0,
        }
    }

    /// Elapsed seconds for one sample at `row`, given the wall time share
    /// measured for it.
    pub fn sample_seconds(&self, row: usize, wall_share: f64) -> f64 {
        match *self {
            AccessClock::Wall => wall_share.max(f64::MIN_POSITIVE),
            AccessClock::Fixed { seconds } => seconds,
            AccessClock::Simulated { compute, .. } => {
                let c = match compute {
                    ComputeTime::Measured => wall_share,
                    ComputeTime::Modeled { seconds } => seconds,
                };
                self.access_seconds(row) + c
            }
        }
    }
}

struct TaskClock<'a, T> {
    clock: AccessClock,
    task: &'a T,
    access_total: &'a mut f64,
}

impl<T: Task> Elapsed<T::Atom> for TaskClock<'_, T> {
    fn elapsed(&mut self, atoms: &[T::Atom], wall_seconds: f64, out: &mut Vec<f64>) {
        let share = wall_seconds / atoms.len().max(1) as f64;
        for x in atoms {
            let row = self.task.access_row(x);
            *self.access_total += self.clock.access_seconds(row);
            out.push(self.clock.sample_seconds(row, share));
        }
    }
}

/// AW-SGD whose sampler step is divided by per-sample elapsed time.
#[derive(Debug, Clone)]
pub struct TimeAware<S: Sampler> {
    inner: AwSgd<S>,
    clock: AccessClock,
    access_total: f64,
}

impl<S: Sampler> TimeAware<S> {
    pub fn new(inner: AwSgd<S>, clock: AccessClock) -> Result<Self> {
        clock.validate()?;
        Ok(Self {
            inner,
            clock,
            access_total: 0.0,
        })
    }

    /// Simulated access seconds accumulated so far, without compute time.
    pub fn access_total(&self) -> f64 {
        self.access_total
    }

    pub fn inner(&self) -> &AwSgd<S> {
        &self.inner
    }

    pub fn sampler(&self) -> &S {
        self.inner.sampler()
    }

    pub fn clock(&self) -> AccessClock {
        self.clock
    }

    pub fn step<T, R>(&mut self, task: &T, model: &mut ModelState, rng: &mut R) -> Result<StepRecord>
    where
        T: Task<Atom = S::Atom>,
        R: Rng + ?Sized,
    {
        let mut clock = TaskClock {
            clock: self.clock,
            task,
            access_total: &mut self.access_total,
        };
        self.inner.step_timed(task, model, rng, Some(&mut clock))
    }
}

impl<T: Task, S: Sampler<Atom = T::Atom>> Optimizer<T> for TimeAware<S> {
    fn step<R: Rng + ?Sized>(&mut self, task: &T, model: &mut ModelState, rng: &mut R) -> Result<StepRecord> {
        TimeAware::step(self, task, model, rng)
    }

    fn batch(&self) -> usize {
        self.inner.batch()
    }
}

/// Settings for the simulated-access speedup benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedupConfig {
    pub n: usize,
    pub m: usize,
    pub rank: usize,
    pub slow_factors: Vec<f64>,
    pub batch_size: usize,
    pub sgd_rho: Schedule,
    pub aw_rho: Schedule,
    pub eta: Schedule,
    pub compute: ComputeTime,
    pub epochs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedupRow {
    pub slow_factor: f64,
    pub sgd_time_s: f64,
    pub aw_time_s: f64,
    pub speedup: f64,
    /// Parts of the totals that were simulated, without wall time.
    pub sgd_simulated_s: f64,
    pub aw_simulated_s: f64,
    /// Final sampling mass on the fast rows.
    pub fast_mass: f64,
}

pub const SPEEDUP_HEADER: &str = "slow_factor,sgd_time_s,aw_time_s,speedup";

/// Which optimizer a benchmark trace belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Sgd,
    TimeAware,
}

/// Sampled step records of one benchmark run, each with the simulated
/// access seconds accumulated up to and including that step.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupTrace {
    pub slow_factor: f64,
    pub side: Side,
    pub points: Vec<(StepRecord, f64)>,
}

/// Runs SGD and time-aware AW-SGD for `epochs` passes over a uniform
/// low-rank matrix at each slow factor and compares total time: measured
/// wall time plus simulated access time.
pub fn speedup_benchmark(cfg: &SpeedupConfig, seed: u64) -> Result<Vec<SpeedupRow>> {
    speedup_benchmark_traced(cfg, seed, 0).map(|(rows, _)| rows)
}

/// [`speedup_benchmark`] that also keeps every `record_every`-th step
/// record of each run (none when 0).
pub fn speedup_benchmark_traced(
    cfg: &SpeedupConfig,
    seed: u64,
    record_every: u64,
) -> Result<(Vec<SpeedupRow>, Vec<SpeedupTrace>)> {
    if cfg.batch_size == 0 || !(cfg.epochs > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "batch size {} over {} epochs",
            cfg.batch_size, cfg.epochs
        )));
    }
    let data = low_rank(
        &LowRankSpec {
            n: cfg.n,
            m: cfg.m,
            rank: cfg.rank,
            block_size: 0,
            block_scale: 1.0,
        },
        seed,
    )?;
    let task = MatFac::new(data.y, cfg.rank)?;
    let w0 = task.init_params(&mut rng(seed, Stream::Init));
    let samples = (cfg.epochs * (cfg.n * cfg.m) as f64).round() as u64;
    let iterations = samples.div_ceil(cfg.batch_size as u64);
    let keep = |it: u64| record_every > 0 && (it % record_every == 0 || it + 1 == iterations);

    let mut rows = Vec::with_capacity(cfg.slow_factors.len());
    let mut traces = Vec::new();
    for &f in &cfg.slow_factors {
        let clock = AccessClock::half_slow(cfg.n, f, cfg.compute);
        clock.validate()?;

        let mut model = ModelState::new(w0.clone(), cfg.sgd_rho)?;
        let mut sgd = Sgd::new(cfg.batch_size)?;
        let mut r = rng(seed, Stream::Sampling);
        let mut kept = Vec::new();
        let started = Instant::now();
        for it in 0..iterations {
            let rec = sgd.step(&task, &mut model, &mut r)?;
            if keep(it) {
                kept.push(rec);
            }
        }
        let sgd_wall = started.elapsed().as_secs_f64();
        // SGD touches the stream only through draw_base, so a replay yields
        // exactly the rows it read.
        let mut r = rng(seed, Stream::Sampling);
        let mut sgd_sim = 0.0;
        let mut points = Vec::with_capacity(kept.len());
        let mut kept = kept.into_iter().peekable();
        for it in 0..iterations {
            for _ in 0..cfg.batch_size {
                sgd_sim += clock.access_seconds(task.access_row(&task.draw_base(&mut r)));
            }
            if kept.peek().is_some_and(|rec| rec.t == it) {
                points.push((kept.next().expect("peeked"), sgd_sim));
            }
        }
        if record_every > 0 {
            traces.push(SpeedupTrace {
                slow_factor: f,
                side: Side::Sgd,
                points,
            });
        }

        let mut model = ModelState::new(w0.clone(), cfg.aw_rho)?;
        let sampler = SoftmaxProduct::uniform(cfg.n, cfg.m)?;
        let mut aw = TimeAware::new(AwSgd::new(sampler, Some(cfg.eta), cfg.batch_size)?, clock)?;
        let mut r = rng(seed, Stream::Sampling);
        let mut points = Vec::new();
        let started = Instant::now();
        for it in 0..iterations {
            let rec = aw.step(&task, &mut model, &mut r)?;
            if keep(it) {
                points.push((rec, aw.access_total()));
            }
        }
        let aw_wall = started.elapsed().as_secs_f64();
        if record_every > 0 {
            traces.push(SpeedupTrace {
                slow_factor: f,
                side: Side::TimeAware,
                points,
            });
        }
        let aw_sim = aw.access_total();
        let fast_mass = aw.sampler().row_mass(0..cfg.n / 2);
        let sgd_total = sgd_wall + sgd_sim;
        let aw_total = aw_wall + aw_sim;
        rows.push(SpeedupRow {
            slow_factor: f,
            sgd_time_s: sgd_total,
            aw_time_s: aw_total,
            speedup: sgd_total / aw_total,
            sgd_simulated_s: sgd_sim,
            aw_simulated_s: aw_sim,
            fast_mass,
        });
    }
    Ok((rows, traces))
}
