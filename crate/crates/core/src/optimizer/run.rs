use std::io::Write;

use rand::Rng;

use super::{AwSgd, ModelState, Sgd, StepRecord};
use crate::sampler::Sampler;
use crate::tasks::Task;
use crate::Result;

pub const METRICS_HEADER: &str = "t,samples,loss,d_norm_sq,density,tau_norm,tau_digest,elapsed_s,eval_loss";

/// Anything that advances a model by one iteration.
pub trait Optimizer<T: Task> {
    fn step<R: Rng + ?Sized>(&mut self, task: &T, model: &mut ModelState, rng: &mut R) -> Result<StepRecord>;

    /// Samples consumed per iteration.
    fn batch(&self) -> usize;
}

impl<T: Task> Optimizer<T> for Sgd {
    fn step<R: Rng + ?Sized>(&mut self, task: &T, model: &mut ModelState, rng: &mut R) -> Result<StepRecord> {
        Sgd::step(self, task, model, rng)
    }

    fn batch(&self) -> usize {
        self.batch
    }
}

impl<T: Task, S: Sampler<Atom = T::Atom>> Optimizer<T> for AwSgd<S> {
    fn step<R: Rng + ?Sized>(&mut self, task: &T, model: &mut ModelState, rng: &mut R) -> Result<StepRecord> {
        AwSgd::step(self, task, model, rng)
    }

    fn batch(&self) -> usize {
        self.batch
    }
}

/// Receives step records as the run progresses.
pub trait MetricsSink {
    fn record(&mut self, rec: &StepRecord, eval_loss: Option<f64>) -> Result<()>;

    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

pub struct NullSink;

impl MetricsSink for NullSink {
    fn record(&mut self, _: &StepRecord, _: Option<f64>) -> Result<()> {
        Ok(())
    }
}

/// Writes records as CSV rows under [`METRICS_HEADER`].
pub struct CsvSink<W: Write> {
    out: W,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{METRICS_HEADER}")?;
        Ok(Self { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> MetricsSink for CsvSink<W> {
    fn record(&mut self, r: &StepRecord, eval_loss: Option<f64>) -> Result<()> {
        write!(
            self.out,
            "{},{},{},{},{},{},",
            r.t, r.samples, r.loss, r.d_norm_sq, r.density, r.tau_norm
        )?;
        if !r.tau_digest.is_nan() {
            write!(self.out, "{}", r.tau_digest)?;
        }
        write!(self.out, ",")?;
        if let Some(e) = r.elapsed {
            write!(self.out, "{e}")?;
        }
        write!(self.out, ",")?;
        if let Some(e) = eval_loss {
            write!(self.out, "{e}")?;
        }
        writeln!(self.out)?;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub iterations: u64,
    /// Evaluate the exact objective every this many iterations (0 = never).
    /// The initial and final states are always evaluated when nonzero.
    pub eval_every: u64,
    /// Emit every this many iterations' record (0 = only evaluation rows).
    pub record_every: u64,
    pub flush_every: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            iterations: 0,
            eval_every: 0,
            record_every: 1,
            flush_every: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub iterations: u64,
    pub samples: u64,
    /// `(samples consumed, exact objective)` at each evaluation.
    pub evals: Vec<(u64, f64)>,
    pub elapsed_total: f64,
}

/// Runs `opts.iterations` steps, reporting to `sink` and calling `observe`
/// after each step with the samples consumed so far.
pub fn run_loop<T, O, R, K, F>(
    task: &mut T,
    model: &mut ModelState,
    opt: &mut O,
    rng: &mut R,
    opts: &RunOptions,
    sink: &mut K,
    mut observe: F,
) -> Result<RunSummary>
where
    T: Task,
    O: Optimizer<T>,
    R: Rng + ?Sized,
    K: MetricsSink + ?Sized,
    F: FnMut(&mut T, &O, &ModelState, &StepRecord) -> Result<()>,
{
    let mut summary = RunSummary::default();
    if opts.iterations == 0 {
        return Ok(summary);
    }
    if opts.eval_every > 0 {
        summary.evals.push((model.samples(), task.objective(&model.w)));
    }
    for it in 0..opts.iterations {
        let rec = opt.step(task, model, rng)?;
        summary.iterations += 1;
        summary.samples += opt.batch() as u64;
        summary.elapsed_total += rec.elapsed.unwrap_or(0.0);
        let done = it + 1;
        let eval = (opts.eval_every > 0 && (done % opts.eval_every == 0 || done == opts.iterations))
            .then(|| task.objective(&model.w));
        if let Some(e) = eval {
            summary.evals.push((model.samples(), e));
        }
        if eval.is_some() || (opts.record_every > 0 && it % opts.record_every == 0) {
            sink.record(&rec, eval)?;
        }
        if opts.flush_every > 0 && done % opts.flush_every == 0 {
            sink.flush()?;
        }
        observe(task, opt, model, &rec)?;
    }
    sink.flush()?;
    Ok(summary)
}
