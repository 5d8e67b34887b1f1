//! Scenario runners. Every (algorithm, seed) pair writes its own metrics
//! CSV into the output directory; `summary.json` is written once all runs
//! have finished.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use awsgd::data::{
    digit_matrix, digit_patterns, imbalanced_logistic, load_mnist, low_rank, mnist_dir, pattern_rows, read_features,
    Matrix, NonStationary, IMAGE_SIDE, MNIST_DIR_ENV, PIXELS,
};
use awsgd::mvis::{exact_variance, Mvis, MVIS_HEADER};
use awsgd::optimizer::{run_loop, CsvSink, Optimizer, RunOptions, RunSummary};
use awsgd::seeding::{rng, Stream};
use awsgd::tasks::gridworld::{GridWorld, PolicyTrainer};
use awsgd::tasks::{Logistic, MatFac, Task, Terminal};
use awsgd::timeaware::{speedup_benchmark_traced, Side, SpeedupConfig, SPEEDUP_HEADER};
use awsgd::{AwSgd, LabelBias, ModelState, Sampler, Schedule, Sgd, SoftmaxProduct, StepRecord};
use rayon::prelude::*;

use crate::config::{
    DigitSource, ExperimentConfig, GridworldParams, LogisticParams, MatfacParams, Method, MnistParams, MvisParams,
    NonstationaryParams, Params, SpeedupParams,
};
use crate::error::{CliError, Result};
use crate::summary::{RunResult, Summary};

pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";
pub const GRIDWORLD_HEADER: &str = "episode,loss,d_norm_sq,density,tau_norm,tau_digest,terminal,skipped,success";
pub const SPEEDUP_TRACE_HEADER: &str = "slow_factor,t,samples,loss,d_norm_sq,density,tau_norm,simulated_s";

/// Name shared by a run's CSV file and its heatmap directory.
pub fn run_id(method: Method, seed: u64) -> String {
    format!("{}-seed{seed}", method.name())
}

/// Runs every (algorithm, seed) pair of `cfg` on up to `jobs` threads and
/// writes the effective config and the summary next to the metrics files.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Summary> {
    match &cfg.params {
        Params::Mnist(p) => {
            mnist_location(&p.mnist_dir)?;
        }
        Params::Nonstationary(p) if p.source == DigitSource::Mnist => {
            mnist_location(&p.mnist_dir)?;
        }
        _ => {}
    }
    fs::create_dir_all(&cfg.output).map_err(|e| CliError::io(&cfg.output, e))?;
    write_text(&cfg.output.join(CONFIG_FILE), &cfg.to_json())?;
    let units: Vec<(Option<Method>, u64)> = match cfg.params {
        // Both sides of the benchmark share one run per seed.
        Params::Speedup(_) => cfg.seeds.iter().map(|&s| (None, s)).collect(),
        _ => cfg
            .algorithm
            .methods()
            .into_iter()
            .flat_map(|m| cfg.seeds.iter().map(move |&s| (Some(m), s)))
            .collect(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::io(&cfg.output, std::io::Error::other(e)))?;
    let outcomes: Vec<Result<Vec<RunResult>>> =
        pool.install(|| units.par_iter().map(|&(m, seed)| run_unit(cfg, m, seed)).collect());

    let mut runs = Vec::new();
    let mut first_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(r) => runs.extend(r),
            Err(e) => {
                log::error!("{e}");
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let summary = Summary::new(cfg.scenario, cfg.seeds.clone(), runs);
    write_text(&cfg.output.join(SUMMARY_FILE), &summary.to_json())?;
    Ok(summary)
}

fn run_unit(cfg: &ExperimentConfig, method: Option<Method>, seed: u64) -> Result<Vec<RunResult>> {
    let ctx = |m: Method| Ctx {
        out: &cfg.output,
        method: m,
        seed,
        id: run_id(m, seed),
    };
    log::info!("{} seed {seed}: starting", cfg.scenario.name());
    let result = match (&cfg.params, method) {
        (Params::Speedup(p), _) => return speedup(&cfg.output, seed, p),
        (_, None) => unreachable!("only the speedup benchmark runs without a method"),
        (Params::Mvis(p), Some(m)) => mvis(&ctx(m), p),
        (Params::Matfac(p), Some(m)) => matfac(&ctx(m), p),
        (Params::Mnist(p), Some(m)) => mnist(&ctx(m), p),
        (Params::Nonstationary(p), Some(m)) => nonstationary(&ctx(m), p),
        (Params::Logistic(p), Some(m)) => logistic(&ctx(m), p),
        (Params::Gridworld(p), Some(m)) => gridworld(&ctx(m), p),
    }?;
    log::info!("{} {}: done", cfg.scenario.name(), run_id(result.algorithm, seed));
    Ok(vec![result])
}

struct Ctx<'a> {
    out: &'a Path,
    method: Method,
    seed: u64,
    id: String,
}

impl Ctx<'_> {
    fn fail(&self) -> impl Fn(awsgd::Error) -> CliError + '_ {
        move |source| CliError::Run {
            run: self.id.clone(),
            source,
        }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        create(&self.out.join(name))
    }

    fn metrics_file(&self) -> Result<BufWriter<File>> {
        self.create(&format!("{}.csv", self.id))
    }

    fn result(&self) -> RunResult {
        RunResult::new(self.method, self.seed)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, format!("{text}\n")).map_err(|e| CliError::io(path, e))
}

/// CSV cell for a float; NaN becomes an empty cell.
fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

fn train<T, O, F>(ctx: &Ctx, task: &mut T, model: &mut ModelState, opt: &mut O, opts: &RunOptions, observe: F) -> Result<RunSummary>
where
    T: Task,
    O: Optimizer<T>,
    F: FnMut(&mut T, &O, &ModelState, &StepRecord) -> awsgd::Result<()>,
{
    let mut sink = CsvSink::new(ctx.metrics_file()?).map_err(ctx.fail())?;
    let mut r = rng(ctx.seed, Stream::Sampling);
    run_loop(task, model, opt, &mut r, opts, &mut sink, observe).map_err(ctx.fail())
}

/// Final and initial objective plus the evaluation curve.
fn loss_result(ctx: &Ctx, summary: &RunSummary) -> RunResult {
    let mut r = ctx.result();
    if let (Some(first), Some(last)) = (summary.evals.first(), summary.evals.last()) {
        r.metric("initial_loss", first.1);
        r.metric("final_loss", last.1);
    }
    r.metric("samples", summary.samples as f64);
    r.curve("eval_loss", summary.evals.clone());
    r
}

fn mvis(ctx: &Ctx, p: &MvisParams) -> Result<RunResult> {
    let fail = ctx.fail();
    let data = low_rank(&p.matrix.into(), ctx.seed).map_err(&fail)?;
    let task = MatFac::new(data.y, p.matrix.rank).map_err(&fail)?;
    let w = task.init_params(&mut rng(ctx.seed, Stream::Init));
    let values: Vec<((usize, usize), f64)> = task
        .atoms()
        .into_iter()
        .map(|x| {
            let f = task.loss(&w, &x);
            (x, f)
        })
        .collect();
    let sampler = SoftmaxProduct::uniform(p.matrix.n, p.matrix.m).map_err(&fail)?;
    let mut est = match ctx.method {
        Method::Sgd => Mvis::frozen(sampler),
        Method::Awsgd => Mvis::new(sampler, p.eta).map_err(&fail)?,
    };
    let steps = (p.epochs * values.len() as f64).round().max(2.0) as u64;
    let v0 = exact_variance(est.sampler(), &values).map_err(&fail)?;

    let mut out = ctx.metrics_file()?;
    let io = |e| CliError::io(ctx.out.join(format!("{}.csv", ctx.id)), e);
    writeln!(out, "{MVIS_HEADER},exact_std").map_err(io)?;
    let mut curve = Vec::new();
    let mut r = rng(ctx.seed, Stream::Sampling);
    for t in 0..steps {
        let rec = est.step(|x| task.loss(&w, x), &mut r).map_err(&fail)?;
        if p.record_every > 0 && (t % p.record_every == 0 || t + 1 == steps) {
            let std = exact_variance(est.sampler(), &values).map_err(&fail)?.sqrt();
            curve.push((t + 1, std));
            writeln!(
                out,
                "{},{},{},{},{},{}",
                rec.t,
                cell(rec.weighted_value),
                cell(rec.gamma_hat),
                cell(rec.std_dev),
                cell(rec.tau_norm),
                cell(std)
            )
            .map_err(io)?;
        }
    }
    out.flush().map_err(io)?;

    let (gamma_hat, std_dev) = est.estimate().map_err(&fail)?;
    let v_final = exact_variance(est.sampler(), &values).map_err(&fail)?;
    let mut r = ctx.result();
    r.metric("gamma", values.iter().map(|v| v.1).sum::<f64>() / values.len() as f64);
    r.metric("gamma_hat", gamma_hat);
    r.metric("std_dev", std_dev);
    r.metric("exact_std", v_final.sqrt());
    r.metric("exact_std_ratio", (v_final / v0).sqrt());
    r.metric("samples", steps as f64);
    r.curve("exact_std", curve);
    Ok(r)
}


/// Settings shared by the matrix factorization scenarios.
struct FitSettings {
    rank: usize,
    batch_size: usize,
    sgd_rho: Schedule,
    aw_rho: Schedule,
    eta: Schedule,
    epochs: f64,
    eval_every: u64,
    record_every: u64,
    inner_steps: usize,
}

fn matfac(ctx: &Ctx, p: &MatfacParams) -> Result<RunResult> {
    let fail = ctx.fail();
    let y = match &p.matrix_file {
        Some(path) => Matrix::load(path).map_err(&fail)?,
        None => low_rank(&p.matrix.into(), ctx.seed).map_err(&fail)?.y,
    };
    fit(
        ctx,
        y,
        &FitSettings {
            rank: p.matrix.rank,
            batch_size: p.batch_size,
            sgd_rho: p.sgd_rho,
            aw_rho: p.aw_rho,
            eta: p.eta,
            epochs: p.epochs,
            eval_every: p.eval_every,
            record_every: p.record_every,
            inner_steps: p.inner_steps,
        },
    )
}

fn mnist_location(dir: &Option<PathBuf>) -> Result<PathBuf> {
    match dir {
        Some(d) => Ok(d.clone()),
        None => mnist_dir().ok_or_else(|| {
            CliError::MissingData(format!("set {MNIST_DIR_ENV} or params.mnist_dir to the MNIST directory"))
        }),
    }
}

fn mnist(ctx: &Ctx, p: &MnistParams) -> Result<RunResult> {
    let fail = ctx.fail();
    let (images, labels) = load_mnist(mnist_location(&p.mnist_dir)?).map_err(&fail)?;
    let y = digit_matrix(&images, &labels, p.digit).map_err(&fail)?;
    fit(
        ctx,
        y,
        &FitSettings {
            rank: p.rank,
            batch_size: p.batch_size,
            sgd_rho: p.sgd_rho,
            aw_rho: p.aw_rho,
            eta: p.eta,
            epochs: p.epochs,
            eval_every: p.eval_every,
            record_every: p.record_every,
            inner_steps: 1,
        },
    )
}

fn fit(ctx: &Ctx, y: Matrix, s: &FitSettings) -> Result<RunResult> {
    let fail = ctx.fail();
    let (n, m) = y.shape();
    let mut task = MatFac::new(y, s.rank).map_err(&fail)?;
    let w = task.init_params(&mut rng(ctx.seed, Stream::Init));
    let opts = RunOptions {
        iterations: (s.epochs * (n * m) as f64 / s.batch_size as f64).ceil() as u64,
        eval_every: s.eval_every,
        record_every: s.record_every,
        ..RunOptions::default()
    };
    match ctx.method {
        Method::Sgd => {
            let mut model = ModelState::new(w, s.sgd_rho).map_err(&fail)?;
            let mut opt = Sgd::new(s.batch_size).map_err(&fail)?;
            let summary = train(ctx, &mut task, &mut model, &mut opt, &opts, |_, _, _, _| Ok(()))?;
            Ok(loss_result(ctx, &summary))
        }
        Method::Awsgd => {
            let mut model = ModelState::new(w, s.aw_rho).map_err(&fail)?;
            let sampler = SoftmaxProduct::uniform(n, m).map_err(&fail)?;
            let mut opt = AwSgd::new(sampler, Some(s.eta), s.batch_size)
                .and_then(|o| o.with_inner_steps(s.inner_steps))
                .map_err(&fail)?;
            let summary = train(ctx, &mut task, &mut model, &mut opt, &opts, |_, _, _, _| Ok(()))?;
            let mut r = loss_result(ctx, &summary);
            r.metric("skipped_tau_samples", opt.skipped_tau_samples() as f64);
            Ok(r)
        }
    }
}

fn column_means(y: &Matrix) -> Vec<f64> {
    let mut sums = vec![0.0; y.cols()];
    for i in 0..y.rows() {
        for (s, v) in sums.iter_mut().zip(y.row(i)) {
            *s += v;
        }
    }
    sums.iter().map(|s| s / y.rows().max(1) as f64).collect()
}

fn nonstationary(ctx: &Ctx, p: &NonstationaryParams) -> Result<RunResult> {
    let fail = ctx.fail();
    let (a, b) = match p.source {
        DigitSource::Synthetic => {
            let patterns = digit_patterns();
            let mut r = rng(ctx.seed, Stream::Data);
            let a = pattern_rows(&patterns.ring, p.rows, p.noise, &mut r).map_err(&fail)?;
            let b = pattern_rows(&patterns.bar, p.rows, p.noise, &mut r).map_err(&fail)?;
            (a, b)
        }
        DigitSource::Mnist => {
            let (images, labels) = load_mnist(mnist_location(&p.mnist_dir)?).map_err(&fail)?;
            let a = digit_matrix(&images, &labels, 0).map_err(&fail)?;
            let b = digit_matrix(&images, &labels, 1).map_err(&fail)?;
            (a, b)
        }
    };
    if a.cols() != PIXELS {
        return Err(fail(awsgd::Error::DimensionMismatch(format!(
            "heatmaps need {PIXELS} columns, the data has {}",
            a.cols()
        ))));
    }
    // Columns where the incoming rows are brighter than the outgoing ones.
    let active: Vec<usize> = column_means(&b)
        .iter()
        .zip(column_means(&a))
        .enumerate()
        .filter(|(_, (vb, va))| **vb > *va)
        .map(|(j, _)| j)
        .collect();
    let mut stream = NonStationary::new(&a, b, p.switch_start, p.switch_end, ctx.seed).map_err(&fail)?;
    let (n, m) = a.shape();
    let mut task = MatFac::new(a, p.rank).map_err(&fail)?;
    let w = task.init_params(&mut rng(ctx.seed, Stream::Init));
    let opts = RunOptions {
        iterations: p.samples.div_ceil(p.batch_size as u64),
        eval_every: p.eval_every,
        record_every: p.record_every,
        ..RunOptions::default()
    };
    let heat_dir = ctx.out.join("heatmaps").join(&ctx.id);
    fs::create_dir_all(&heat_dir).map_err(|e| CliError::io(&heat_dir, e))?;
    let mut drift = Drift {
        active,
        heat_dir,
        heatmap_every: p.heatmap_every,
        next_heatmap: 0,
        start: p.switch_start,
        late: p.switch_end.saturating_mul(2),
        mass_start: None,
        mass_late: None,
        curve: Vec::new(),
    };

    let (summary, final_mass) = match ctx.method {
        Method::Sgd => {
            let uniform = vec![1.0 / m as f64; m];
            drift.observe(0, &uniform).map_err(&fail)?;
            let mut model = ModelState::new(w, p.sgd_rho).map_err(&fail)?;
            let mut opt = Sgd::new(p.batch_size).map_err(&fail)?;
            let summary = train(ctx, &mut task, &mut model, &mut opt, &opts, |task, _, _, rec| {
                stream.advance(task.y_mut(), rec.samples);
                drift.observe(rec.samples, &uniform)
            })?;
            (summary, drift.mass(&uniform))
        }
        Method::Awsgd => {
            let mut model = ModelState::new(w, p.aw_rho).map_err(&fail)?;
            let mut opt = AwSgd::new(SoftmaxProduct::uniform(n, m).map_err(&fail)?, Some(p.eta), p.batch_size)
                .map_err(&fail)?;
            drift.observe(0, &opt.sampler().col_probs()).map_err(&fail)?;
            let summary = train(ctx, &mut task, &mut model, &mut opt, &opts, |task, opt, _, rec| {
                stream.advance(task.y_mut(), rec.samples);
                drift.observe(rec.samples, &opt.sampler().col_probs())
            })?;
            (summary, drift.mass(&opt.sampler().col_probs()))
        }
    };

    let mut r = loss_result(ctx, &summary);
    let start = drift.mass_start.unwrap_or(f64::NAN);
    let late = drift.mass_late.unwrap_or(final_mass);
    r.metric("b_mass_start", start);
    r.metric("b_mass_late", late);
    r.metric("b_mass_ratio", late / start);
    r.metric("b_mass_final", final_mass);
    r.metric("replaced_rows", stream.replaced_rows().len() as f64);
    r.curve("b_mass", std::mem::take(&mut drift.curve));
    Ok(r)
}

/// Tracks column-sampling mass on the incoming pattern and writes heatmaps.
struct Drift {
    active: Vec<usize>,
    heat_dir: PathBuf,
    heatmap_every: u64,
    next_heatmap: u64,
    start: u64,
    late: u64,
    mass_start: Option<f64>,
    mass_late: Option<f64>,
    curve: Vec<(u64, f64)>,
}

impl Drift {
    fn mass(&self, probs: &[f64]) -> f64 {
        self.active.iter().map(|&j| probs[j]).sum()
    }

    fn observe(&mut self, samples: u64, probs: &[f64]) -> awsgd::Result<()> {
        let mass = self.mass(probs);
        if samples >= self.start && self.mass_start.is_none() {
            self.mass_start = Some(mass);
        }
        if samples >= self.late && self.mass_late.is_none() {
            self.mass_late = Some(mass);
        }
        if self.heatmap_every > 0 && samples >= self.next_heatmap {
            self.curve.push((samples, mass));
            let mut out = BufWriter::new(File::create(self.heat_dir.join(format!("samples-{samples}.csv")))?);
            for row in probs.chunks(IMAGE_SIDE) {
                let line: Vec<String> = row.iter().map(|&v| cell(v)).collect();
                writeln!(out, "{}", line.join(","))?;
            }
            out.flush()?;
            while self.next_heatmap <= samples {
                self.next_heatmap += self.heatmap_every;
            }
        }
        Ok(())
    }
}

fn logistic(ctx: &Ctx, p: &LogisticParams) -> Result<RunResult> {
    let fail = ctx.fail();
    let (x, y) = match &p.features {
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            read_features(std::io::BufReader::new(file)).map_err(&fail)?
        }
        None => imbalanced_logistic(p.n_pos, p.n_neg, p.dim, p.separation, ctx.seed).map_err(&fail)?,
    };
    let dim = x.cols();
    let mut task = Logistic::new(x, y.clone()).map_err(&fail)?;
    let opts = RunOptions {
        iterations: p.steps,
        eval_every: p.eval_every,
        record_every: p.record_every,
        ..RunOptions::default()
    };
    match ctx.method {
        Method::Sgd => {
            let mut model = ModelState::new(vec![0.0; dim], p.sgd_rho).map_err(&fail)?;
            let mut opt = Sgd::new(p.batch_size).map_err(&fail)?;
            let summary = train(ctx, &mut task, &mut model, &mut opt, &opts, |_, _, _, _| Ok(()))?;
            Ok(loss_result(ctx, &summary))
        }
        Method::Awsgd => {
            let mut model = ModelState::new(vec![0.0; dim], p.aw_rho).map_err(&fail)?;
            let sampler = LabelBias::new(&y, p.tau0).map_err(&fail)?;
            let mut opt = AwSgd::new(sampler, Some(p.eta), p.batch_size).map_err(&fail)?;
            let mut taus = Vec::with_capacity(p.steps as usize);
            let summary = train(ctx, &mut task, &mut model, &mut opt, &opts, |_, opt, _, _| {
                taus.push(opt.sampler().tau()[0]);
                Ok(())
            })?;
            let mut r = loss_result(ctx, &summary);
            let k = (taus.len() / 10).max(1);
            let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
            r.metric("tau_first_tenth", mean(&taus[..k]));
            r.metric("tau_last_tenth", mean(&taus[taus.len() - k..]));
            r.metric("tau_final", taus[taus.len() - 1]);
            r.metric("positive_probability", opt.sampler().positive_probability());
            Ok(r)
        }
    }
}

fn terminal_name(t: Terminal) -> &'static str {
    match t {
        Terminal::Goal => "goal",
        Terminal::Trap => "trap",
        Terminal::Timeout => "timeout",
    }
}

fn gridworld(ctx: &Ctx, p: &GridworldParams) -> Result<RunResult> {
    let fail = ctx.fail();
    let t_max = p.t_max.unwrap_or_else(|| GridWorld::default_horizon(p.side));
    let world = GridWorld::new(p.side, p.gamma, t_max, &mut rng(ctx.seed, Stream::Data)).map_err(&fail)?;
    let world = Arc::new(world);
    let mut trainer = match ctx.method {
        Method::Sgd => PolicyTrainer::on_policy(world, p.sgd_rho),
        Method::Awsgd => PolicyTrainer::adaptive(world, p.aw_rho, p.eta),
    }
    .map_err(&fail)?
    .with_weight_cap(p.weight_cap);

    let path = ctx.out.join(format!("{}.csv", ctx.id));
    let io = |e| CliError::io(&path, e);
    let mut out = ctx.metrics_file()?;
    writeln!(out, "{GRIDWORLD_HEADER}").map_err(io)?;
    let mut r = rng(ctx.seed, Stream::Sampling);
    let mut eval_rng = rng(ctx.seed, Stream::Evaluation);
    let mut curve = Vec::new();
    let mut goals = 0u64;
    for e in 0..p.episodes {
        let rec = trainer.episode(&mut r).map_err(&fail)?;
        goals += u64::from(rec.terminal == Terminal::Goal);
        let done = e + 1;
        let success = (p.eval_every > 0 && (done % p.eval_every == 0 || done == p.episodes))
            .then(|| trainer.success_probability(p.eval_rollouts, &mut eval_rng));
        if let Some(s) = success {
            curve.push((done, s));
        }
        if success.is_some() || (p.record_every > 0 && e % p.record_every == 0) {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                rec.episode,
                cell(rec.loss),
                cell(rec.d_norm_sq),
                cell(rec.density),
                cell(rec.tau_norm),
                cell(rec.tau_digest),
                terminal_name(rec.terminal),
                rec.skipped,
                success.map_or(String::new(), cell)
            )
            .map_err(io)?;
        }
    }
    out.flush().map_err(io)?;

    let mut res = ctx.result();
    let final_success = match curve.last() {
        Some(&(_, s)) => s,
        None => trainer.success_probability(p.eval_rollouts, &mut eval_rng),
    };
    res.metric("final_success", final_success);
    res.metric("behaviour_goal_rate", goals as f64 / p.episodes as f64);
    res.metric("skipped_updates", trainer.skipped_updates() as f64);
    res.metric("skipped_tau_steps", trainer.skipped_tau_steps() as f64);
    res.curve("success", curve);
    Ok(res)
}

fn speedup(out: &Path, seed: u64, p: &SpeedupParams) -> Result<Vec<RunResult>> {
    let id = format!("speedup-seed{seed}");
    let fail = |source| CliError::Run { run: id.clone(), source };
    let cfg = SpeedupConfig {
        n: p.n,
        m: p.m,
        rank: p.rank,
        slow_factors: p.slow_factors.clone(),
        batch_size: p.batch_size,
        sgd_rho: p.sgd_rho,
        aw_rho: p.aw_rho,
        eta: p.eta,
        compute: p.compute,
        epochs: p.epochs,
    };
    let (rows, traces) = speedup_benchmark_traced(&cfg, seed, p.record_every).map_err(fail)?;

    // Wall time makes this table differ between runs; the per-algorithm
    // files and the summary hold only simulated quantities.
    let table = out.join(format!("{id}.csv"));
    let io = |e| CliError::io(&table, e);
    let mut w = create(&table)?;
    writeln!(w, "{SPEEDUP_HEADER},sgd_simulated_s,aw_simulated_s,fast_mass").map_err(io)?;
    for row in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            cell(row.slow_factor),
            cell(row.sgd_time_s),
            cell(row.aw_time_s),
            cell(row.speedup),
            cell(row.sgd_simulated_s),
            cell(row.aw_simulated_s),
            cell(row.fast_mass)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;

    let mut results = Vec::new();
    for (method, side) in [(Method::Sgd, Side::Sgd), (Method::Awsgd, Side::TimeAware)] {
        let path = out.join(format!("{}.csv", run_id(method, seed)));
        let io = |e| CliError::io(&path, e);
        let mut w = create(&path)?;
        writeln!(w, "{SPEEDUP_TRACE_HEADER}").map_err(io)?;
        for trace in traces.iter().filter(|t| t.side == side) {
            for (rec, simulated) in &trace.points {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    cell(trace.slow_factor),
                    rec.t,
                    rec.samples,
                    cell(rec.loss),
                    cell(rec.d_norm_sq),
                    cell(rec.density),
                    cell(rec.tau_norm),
                    cell(*simulated)
                )
                .map_err(io)?;
            }
        }
        w.flush().map_err(io)?;

        let mut r = RunResult::new(method, seed);
        for row in &rows {
            let f = row.slow_factor;
            match method {
                Method::Sgd => r.metric(&format!("simulated_s_f{f}"), row.sgd_simulated_s),
                Method::Awsgd => {
                    r.metric(&format!("simulated_s_f{f}"), row.aw_simulated_s);
                    r.metric(&format!("simulated_speedup_f{f}"), row.sgd_simulated_s / row.aw_simulated_s);
                    r.metric(&format!("fast_mass_f{f}"), row.fast_mass);
                }
            }
        }
        results.push(r);
    }
    Ok(results)
}
