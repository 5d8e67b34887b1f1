//! Per-run results and the cross-seed `summary.json`.

use std::collections::BTreeMap;

use awsgd::math::median;
use serde::{Deserialize, Serialize};

use crate::config::{Method, Scenario, CONFIG_VERSION};

/// Outcome of one (algorithm, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Method,
    pub seed: u64,
    /// Scalar results, such as the final loss.
    pub metrics: BTreeMap<String, f64>,
    /// `(samples consumed, value)` series.
    pub curves: BTreeMap<String, Vec<(u64, f64)>>,
}

impl RunResult {
    pub fn new(algorithm: Method, seed: u64) -> Self {
        Self {
            algorithm,
            seed,
            metrics: BTreeMap::new(),
            curves: BTreeMap::new(),
        }
    }

    pub fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }

    pub fn curve(&mut self, name: &str, points: Vec<(u64, f64)>) {
        self.curves.insert(name.to_string(), points);
    }

    /// Named scalar, falling back to the last point of the named curve.
    pub fn final_value(&self, name: &str) -> Option<f64> {
        self.metrics
            .get(name)
            .copied()
            .or_else(|| self.curves.get(name).and_then(|c| c.last()).map(|p| p.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation; zero for a single seed.
    pub std: f64,
    pub median: f64,
    pub n: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            median: median(values),
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: u32,
    pub scenario: Scenario,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunResult>,
    /// Per algorithm, per metric statistics across seeds.
    pub aggregate: BTreeMap<Method, BTreeMap<String, Aggregate>>,
}

impl Summary {
    pub fn new(scenario: Scenario, seeds: Vec<u64>, mut runs: Vec<RunResult>) -> Self {
        runs.sort_by_key(|r| (r.algorithm, r.seed));
        let mut grouped: BTreeMap<Method, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
        for r in &runs {
            let g = grouped.entry(r.algorithm).or_default();
            for (k, &v) in &r.metrics {
                g.entry(k.clone()).or_default().push(v);
            }
        }
        let aggregate = grouped
            .into_iter()
            .map(|(m, g)| (m, g.into_iter().map(|(k, v)| (k, Aggregate::of(&v))).collect()))
            .collect();
        Self {
            version: CONFIG_VERSION,
            scenario,
            seeds,
            runs,
            aggregate,
        }
    }

    pub fn runs_of(&self, m: Method) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(move |r| r.algorithm == m)
    }

    /// Algorithms present in the runs.
    pub fn methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = self.runs.iter().map(|r| r.algorithm).collect();
        out.dedup();
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_statistics() {
        let a = Aggregate::of(&[1.0, 2.0, 3.0, 10.0]);
        assert_eq!(a.mean, 4.0);
        assert_eq!(a.median, 2.5);
        assert_eq!(a.n, 4);
        assert!((a.std - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(Aggregate::of(&[5.0]).std, 0.0);
    }

    #[test]
    fn summary_groups_by_algorithm() {
        let mut r1 = RunResult::new(Method::Awsgd, 2);
        r1.metric("final_loss", 1.0);
        let mut r2 = RunResult::new(Method::Sgd, 1);
        r2.metric("final_loss", 3.0);
        let mut r3 = RunResult::new(Method::Awsgd, 1);
        r3.metric("final_loss", 2.0);
        r3.curve("eval_loss", vec![(0, 9.0), (10, 2.0)]);
        let s = Summary::new(Scenario::MatfacBlock, vec![1, 2], vec![r1, r2, r3]);
        assert_eq!(s.methods(), vec![Method::Sgd, Method::Awsgd]);
        assert_eq!(s.aggregate[&Method::Awsgd]["final_loss"].mean, 1.5);
        assert_eq!(s.runs_of(Method::Awsgd).next().unwrap().seed, 1);
        assert_eq!(s.runs[1].final_value("eval_loss"), Some(2.0));
        let back: Summary = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }
}
