//! Experiment configuration: JSON documents with dotted-path overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use awsgd::data::LowRankSpec;
use awsgd::tasks::GridWorld;
use awsgd::timeaware::ComputeTime;
use awsgd::Schedule;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

/// Version of the config layout understood by this build.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    MvisBlock,
    MatfacBlock,
    MatfacMnist,
    MatfacNonstationary,
    LogisticImbalance,
    Gridworld,
    TimeawareSpeedup,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::MvisBlock,
        Scenario::MatfacBlock,
        Scenario::MatfacMnist,
        Scenario::MatfacNonstationary,
        Scenario::LogisticImbalance,
        Scenario::Gridworld,
        Scenario::TimeawareSpeedup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::MvisBlock => "mvis-block",
            Scenario::MatfacBlock => "matfac-block",
            Scenario::MatfacMnist => "matfac-mnist",
            Scenario::MatfacNonstationary => "matfac-nonstationary",
            Scenario::LogisticImbalance => "logistic-imbalance",
            Scenario::Gridworld => "gridworld",
            Scenario::TimeawareSpeedup => "timeaware-speedup",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Sgd,
    Awsgd,
    Both,
}

/// A single optimizer, as opposed to the [`Algorithm::Both`] selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Sgd,
    Awsgd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Awsgd => "awsgd",
        }
    }
}

impl Algorithm {
    pub fn methods(self) -> Vec<Method> {
        match self {
            Algorithm::Sgd => vec![Method::Sgd],
            Algorithm::Awsgd => vec![Method::Awsgd],
            Algorithm::Both => vec![Method::Sgd, Method::Awsgd],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub n: usize,
    pub m: usize,
    pub rank: usize,
    pub block_size: usize,
    pub block_scale: f64,
}

impl From<MatrixSpec> for LowRankSpec {
    fn from(s: MatrixSpec) -> Self {
        LowRankSpec {
            n: s.n,
            m: s.m,
            rank: s.rank,
            block_size: s.block_size,
            block_scale: s.block_scale,
        }
    }
}

fn one() -> u64 {
    1
}

fn one_usize() -> usize {
    1
}

/// Importance sampling of the mean loss of frozen random factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MvisParams {
    pub matrix: MatrixSpec,
    pub eta: Schedule,
    pub epochs: f64,
    #[serde(default = "one")]
    pub record_every: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatfacParams {
    pub matrix: MatrixSpec,
    /// Matrix interchange file used instead of the generator when set; the
    /// factorization rank still comes from `matrix.rank`.
    #[serde(default)]
    pub matrix_file: Option<PathBuf>,
    pub batch_size: usize,
    pub sgd_rho: Schedule,
    pub aw_rho: Schedule,
    pub eta: Schedule,
    pub epochs: f64,
    pub eval_every: u64,
    #[serde(default = "one")]
    pub record_every: u64,
    #[serde(default = "one_usize")]
    pub inner_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnistParams {
    /// Falls back to the `AWSGD_MNIST_DIR` environment variable.
    #[serde(default)]
    pub mnist_dir: Option<PathBuf>,
    pub digit: u8,
    pub rank: usize,
    pub batch_size: usize,
    pub sgd_rho: Schedule,
    pub aw_rho: Schedule,
    pub eta: Schedule,
    pub epochs: f64,
    pub eval_every: u64,
    #[serde(default = "one")]
    pub record_every: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DigitSource {
    /// Ring and bar patterns generated from the seed.
    Synthetic,
    /// Zeros replaced by ones from the MNIST training set.
    Mnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonstationaryParams {
    pub source: DigitSource,
    /// Rows generated per pattern for the synthetic source.
    pub rows: usize,
    pub noise: f64,
    #[serde(default)]
    pub mnist_dir: Option<PathBuf>,
    pub rank: usize,
    pub batch_size: usize,
    pub sgd_rho: Schedule,
    pub aw_rho: Schedule,
    pub eta: Schedule,
    pub switch_start: u64,
    pub switch_end: u64,
    pub samples: u64,
    pub heatmap_every: u64,
    pub eval_every: u64,
    #[serde(default = "one")]
    pub record_every: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticParams {
    pub n_pos: usize,
    pub n_neg: usize,
    pub dim: usize,
    pub separation: f64,
    /// CSV feature file used instead of the generator when set.
    #[serde(default)]
    pub features: Option<PathBuf>,
    pub batch_size: usize,
    pub sgd_rho: Schedule,
    pub aw_rho: Schedule,
    pub eta: Schedule,
    pub tau0: f64,
    pub steps: u64,
    pub eval_every: u64,
    #[serde(default = "one")]
    pub record_every: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridworldParams {
    pub side: usize,
    pub gamma: f64,
    /// Defaults to `4 * side^2`.
    #[serde(default)]
    pub t_max: Option<usize>,
    pub episodes: u64,
    pub eval_every: u64,
    pub eval_rollouts: usize,
    pub sgd_rho: Schedule,
    pub aw_rho: Schedule,
    pub eta: Schedule,
    #[serde(default = "default_weight_cap")]
    pub weight_cap: f64,
    #[serde(default = "one")]
    pub record_every: u64,
}

fn default_weight_cap() -> f64 {
    awsgd::tasks::gridworld::DEFAULT_WEIGHT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedupParams {
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
    pub record_every: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Mvis(MvisParams),
    Matfac(MatfacParams),
    Mnist(MnistParams),
    Nonstationary(NonstationaryParams),
    Logistic(LogisticParams),
    Gridworld(GridworldParams),
    Speedup(SpeedupParams),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub scenario: Scenario,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub params: Params,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    scenario: Scenario,
    algorithm: Algorithm,
    seeds: Vec<u64>,
    output: PathBuf,
    params: Value,
}

fn params<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| CliError::config(format!("params: {e}")))
}

impl ExperimentConfig {
    /// Parses and validates a config document, filling derived defaults.
    pub fn from_value(v: Value) -> Result<Self> {
        let h: Header = serde_json::from_value(v).map_err(|e| CliError::config(e.to_string()))?;
        if h.version != CONFIG_VERSION {
            return Err(CliError::config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                h.version
            )));
        }
        let params = match h.scenario {
            Scenario::MvisBlock => Params::Mvis(params(h.params)?),
            Scenario::MatfacBlock => Params::Matfac(params(h.params)?),
            Scenario::MatfacMnist => Params::Mnist(params(h.params)?),
            Scenario::MatfacNonstationary => Params::Nonstationary(params(h.params)?),
            Scenario::LogisticImbalance => Params::Logistic(params(h.params)?),
            Scenario::Gridworld => Params::Gridworld(params(h.params)?),
            Scenario::TimeawareSpeedup => Params::Speedup(params(h.params)?),
        };
        let mut cfg = ExperimentConfig {
            version: h.version,
            scenario: h.scenario,
            algorithm: h.algorithm,
            seeds: h.seeds,
            output: h.output,
            params,
        };
        if let Params::Gridworld(g) = &mut cfg.params {
            g.t_max.get_or_insert(GridWorld::default_horizon(g.side));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds: at least one seed is required"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(CliError::config("seeds: duplicate seed"));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(format!("params.{name}: must be positive, got {v}")))
            }
        };
        let nonzero = |name: &str, v: u64| {
            if v > 0 {
                Ok(())
            } else {
                Err(CliError::config(format!("params.{name}: must be at least 1")))
            }
        };
        let schedules = |list: &[(&str, &Schedule)]| -> Result<()> {
            for (name, s) in list {
                s.validate().map_err(|e| CliError::config(format!("params.{name}: {e}")))?;
            }
            Ok(())
        };
        let matrix = |m: &MatrixSpec| -> Result<()> {
            if m.n == 0 || m.m == 0 || m.rank == 0 || m.block_size > m.n.min(m.m) {
                return Err(CliError::config(format!("params.matrix: unusable shape {m:?}")));
            }
            Ok(())
        };
        match &self.params {
            Params::Mvis(p) => {
                matrix(&p.matrix)?;
                schedules(&[("eta", &p.eta)])?;
                positive("epochs", p.epochs)?;
            }
            Params::Matfac(p) => {
                matrix(&p.matrix)?;
                schedules(&[("sgd_rho", &p.sgd_rho), ("aw_rho", &p.aw_rho), ("eta", &p.eta)])?;
                nonzero("batch_size", p.batch_size as u64)?;
                nonzero("inner_steps", p.inner_steps as u64)?;
                positive("epochs", p.epochs)?;
            }
            Params::Mnist(p) => {
                schedules(&[("sgd_rho", &p.sgd_rho), ("aw_rho", &p.aw_rho), ("eta", &p.eta)])?;
                nonzero("batch_size", p.batch_size as u64)?;
                nonzero("rank", p.rank as u64)?;
                positive("epochs", p.epochs)?;
                if p.digit > 9 {
                    return Err(CliError::config(format!("params.digit: {} is not a digit", p.digit)));
                }
            }
            Params::Nonstationary(p) => {
                schedules(&[("sgd_rho", &p.sgd_rho), ("aw_rho", &p.aw_rho), ("eta", &p.eta)])?;
                nonzero("batch_size", p.batch_size as u64)?;
                nonzero("rank", p.rank as u64)?;
                nonzero("samples", p.samples)?;
                if p.source == DigitSource::Synthetic {
                    nonzero("rows", p.rows as u64)?;
                }
                if p.switch_end < p.switch_start {
                    return Err(CliError::config("params.switch_end: before switch_start"));
                }
            }
            Params::Logistic(p) => {
                schedules(&[("sgd_rho", &p.sgd_rho), ("aw_rho", &p.aw_rho), ("eta", &p.eta)])?;
                nonzero("batch_size", p.batch_size as u64)?;
                nonzero("steps", p.steps)?;
                if p.features.is_none() {
                    nonzero("n_pos", p.n_pos as u64)?;
                    nonzero("n_neg", p.n_neg as u64)?;
                    nonzero("dim", p.dim as u64)?;
                }
                if !p.tau0.is_finite() {
                    return Err(CliError::config("params.tau0: must be finite"));
                }
            }
            Params::Gridworld(p) => {
                schedules(&[("sgd_rho", &p.sgd_rho), ("aw_rho", &p.aw_rho), ("eta", &p.eta)])?;
                nonzero("side", p.side as u64)?;
                nonzero("episodes", p.episodes)?;
                nonzero("t_max", p.t_max.unwrap_or(0) as u64)?;
                positive("weight_cap", p.weight_cap)?;
                if !(p.gamma > 0.0 && p.gamma < 1.0) {
                    return Err(CliError::config(format!("params.gamma: {} is outside (0, 1)", p.gamma)));
                }
            }
            Params::Speedup(p) => {
                schedules(&[("sgd_rho", &p.sgd_rho), ("aw_rho", &p.aw_rho), ("eta", &p.eta)])?;
                nonzero("batch_size", p.batch_size as u64)?;
                positive("epochs", p.epochs)?;
                if p.slow_factors.is_empty() {
                    return Err(CliError::config("params.slow_factors: empty"));
                }
                for &f in &p.slow_factors {
                    positive("slow_factors", f)?;
                }
                if self.algorithm != Algorithm::Both {
                    return Err(CliError::config("algorithm: the speedup benchmark always runs both"));
                }
            }
        }
        Ok(())
    }
}

/// Sets the value at a dotted `path`, e.g. `params.eta.rate=0.1`. The value
/// is read as JSON when it parses, as a bare string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{assignment}` is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::config(format!("override path `{path}` has an empty segment")));
    }
    for (depth, key) in keys.iter().enumerate() {
        let last = depth + 1 == keys.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), value);
                    return Ok(());
                }
                map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let i: usize = key
                    .parse()
                    .map_err(|_| CliError::config(format!("override path `{path}`: `{key}` is not an index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(i)
                    .ok_or_else(|| CliError::config(format!("override path `{path}`: index {i} out of {len}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(CliError::config(format!(
                    "override path `{path}`: `{key}` is inside a scalar"
                )))
            }
        };
    }
    unreachable!("the loop returns at the last segment")
}

pub fn read_document(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Where the base document of a run comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigSource {
    File(PathBuf),
    Preset(Scenario),
}

/// Loads the base document, applies `overrides` in order and validates.
pub fn build_config(source: &ConfigSource, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut doc = match source {
        ConfigSource::File(path) => read_document(path)?,
        ConfigSource::Preset(s) => crate::presets::preset(*s),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    ExperimentConfig::from_value(doc)
}

/// Comma-separated seed list such as `1,2,3`.
pub fn parse_seeds(list: &str) -> Result<Vec<u64>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::config(format!("seeds: `{s}` is not a seed")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn override_replaces_nested_values() {
        let mut doc = json!({"params": {"eta": {"kind": "constant", "rate": 1.0}}, "seeds": [1]});
        apply_override(&mut doc, "params.eta.rate=0.25").unwrap();
        apply_override(&mut doc, "seeds=[4,5]").unwrap();
        apply_override(&mut doc, "output=out/x").unwrap();
        assert_eq!(doc["params"]["eta"]["rate"], json!(0.25));
        assert_eq!(doc["seeds"], json!([4, 5]));
        assert_eq!(doc["output"], json!("out/x"));
    }

    #[test]
    fn override_rejects_malformed_paths() {
        let mut doc = json!({"a": 1, "b": [1, 2]});
        assert!(apply_override(&mut doc, "a").is_err());
        assert!(apply_override(&mut doc, "a.b=1").is_err());
        assert!(apply_override(&mut doc, "b.7=1").is_err());
        assert!(apply_override(&mut doc, "..=1").is_err());
        apply_override(&mut doc, "b.1=9").unwrap();
        assert_eq!(doc["b"], json!([1, 9]));
    }

    #[test]
    fn seed_lists_parse() {
        assert_eq!(parse_seeds("1, 2,3").unwrap(), vec![1, 2, 3]);
        assert!(parse_seeds("1,x").is_err());
    }
}
