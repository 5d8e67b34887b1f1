//! Comparison of two runs' summaries on one metric.
//!
//! For a curve metric the threshold is a target value: each seed reports
//! the samples each algorithm needed to reach it, and the verdict passes
//! when the ratio of the medians (A over B) is at most `max_ratio`. For a
//! scalar metric the threshold is the smallest acceptable mean paired
//! improvement of A over B.

use std::path::{Path, PathBuf};

use awsgd::math::median;
use serde::Serialize;

use crate::config::Method;
use crate::error::{CliError, Result};
use crate::scenarios::SUMMARY_FILE;
use crate::summary::{RunResult, Summary};

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub metric: String,
    pub threshold: f64,
    pub a_algorithm: Method,
    pub b_algorithm: Method,
    pub higher_is_better: bool,
    pub max_ratio: f64,
}

impl CompareOptions {
    pub fn new(metric: impl Into<String>, threshold: f64) -> Self {
        Self {
            metric: metric.into(),
            threshold,
            a_algorithm: Method::Awsgd,
            b_algorithm: Method::Sgd,
            higher_is_better: false,
            max_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Curve,
    Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedComparison {
    pub seed: u64,
    /// Samples consumed when the curve first reached the threshold.
    pub a_samples: Option<u64>,
    pub b_samples: Option<u64>,
    pub samples_ratio: Option<f64>,
    pub a_final: f64,
    pub b_final: f64,
    /// `a_final - b_final`.
    pub delta: f64,
    pub a_better: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub metric: String,
    pub kind: MetricKind,
    pub threshold: f64,
    pub higher_is_better: bool,
    pub a_algorithm: Method,
    pub b_algorithm: Method,
    pub seeds: Vec<SeedComparison>,
    /// Medians over seeds; seeds that never reach the threshold count as
    /// infinitely many samples.
    pub a_median_samples: Option<f64>,
    pub b_median_samples: Option<f64>,
    pub samples_ratio: Option<f64>,
    pub mean_delta: f64,
    pub a_wins: usize,
    pub pass: bool,
    pub reason: String,
}

/// Reads `summary.json` from a file path or a run directory.
pub fn load_summary(path: &Path) -> Result<Summary> {
    let file: PathBuf = if path.is_dir() {
        path.join(SUMMARY_FILE)
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", file.display())))
}

fn crossing(curve: &[(u64, f64)], threshold: f64, higher: bool) -> Option<u64> {
    curve
        .iter()
        .find(|&&(_, v)| if higher { v >= threshold } else { v <= threshold })
        .map(|&(s, _)| s)
}

fn median_samples(values: &[Option<u64>]) -> f64 {
    let v: Vec<f64> = values.iter().map(|s| s.map_or(f64::INFINITY, |s| s as f64)).collect();
    median(&v)
}

pub fn compare(a: &Summary, b: &Summary, opts: &CompareOptions) -> Result<Report> {
    let metric = opts.metric.as_str();
    let has_curve = |r: &RunResult| r.curves.contains_key(metric);
    let has_any = |r: &RunResult| has_curve(r) || r.metrics.contains_key(metric);
    let pairs: Vec<(&RunResult, &RunResult)> = a
        .runs_of(opts.a_algorithm)
        .filter_map(|ra| b.runs_of(opts.b_algorithm).find(|rb| rb.seed == ra.seed).map(|rb| (ra, rb)))
        .filter(|(ra, rb)| has_any(ra) && has_any(rb))
        .collect();
    if pairs.is_empty() {
        return Err(CliError::config(format!(
            "no seed has `{metric}` for both {} in A and {} in B",
            opts.a_algorithm.name(),
            opts.b_algorithm.name()
        )));
    }
    let kind = if pairs.iter().all(|(ra, rb)| has_curve(ra) && has_curve(rb)) {
        MetricKind::Curve
    } else {
        MetricKind::Scalar
    };
    let higher = opts.higher_is_better;

    let seeds: Vec<SeedComparison> = pairs
        .iter()
        .map(|(ra, rb)| {
            let (a_samples, b_samples) = match kind {
                MetricKind::Curve => (
                    crossing(&ra.curves[metric], opts.threshold, higher),
                    crossing(&rb.curves[metric], opts.threshold, higher),
                ),
                MetricKind::Scalar => (None, None),
            };
            let a_final = ra.final_value(metric).unwrap_or(f64::NAN);
            let b_final = rb.final_value(metric).unwrap_or(f64::NAN);
            SeedComparison {
                seed: ra.seed,
                a_samples,
                b_samples,
                samples_ratio: a_samples.zip(b_samples).map(|(x, y)| x as f64 / y as f64),
                a_final,
                b_final,
                delta: a_final - b_final,
                a_better: if higher { a_final > b_final } else { a_final < b_final },
            }
        })
        .collect();

    let mean_delta = seeds.iter().map(|s| s.delta).sum::<f64>() / seeds.len() as f64;
    let a_wins = seeds.iter().filter(|s| s.a_better).count();
    let (a_median, b_median, ratio, pass, reason) = match kind {
        MetricKind::Curve => {
            let am = median_samples(&seeds.iter().map(|s| s.a_samples).collect::<Vec<_>>());
            let bm = median_samples(&seeds.iter().map(|s| s.b_samples).collect::<Vec<_>>());
            let ratio = am / bm;
            let pass = ratio.is_finite() && ratio <= opts.max_ratio;
            let reason = if !bm.is_finite() {
                "B does not reach the threshold in most seeds".to_string()
            } else {
                format!("median samples ratio {ratio} against a maximum of {}", opts.max_ratio)
            };
            (Some(am), Some(bm), Some(ratio), pass, reason)
        }
        MetricKind::Scalar => {
            let improvement = if higher { mean_delta } else { -mean_delta };
            let pass = improvement >= opts.threshold;
            let reason = format!("mean paired improvement {improvement} against a minimum of {}", opts.threshold);
            (None, None, None, pass, reason)
        }
    };

    Ok(Report {
        metric: metric.to_string(),
        kind,
        threshold: opts.threshold,
        higher_is_better: higher,
        a_algorithm: opts.a_algorithm,
        b_algorithm: opts.b_algorithm,
        seeds,
        a_median_samples: a_median,
        b_median_samples: b_median,
        samples_ratio: ratio,
        mean_delta,
        a_wins,
        pass,
        reason,
    })
}
