//! `gen-data`: writes synthetic datasets described by a JSON spec.
//!
//! Matrices use the interchange format (two little-endian `u64` dimensions,
//! then `f64` values row-major); logistic data is a `label,f0,...` CSV.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use awsgd::data::{
    digit_matrix, digit_patterns, imbalanced_logistic, load_mnist, low_rank, mnist_dir, pattern_rows, write_features,
    LowRankSpec, MNIST_DIR_ENV,
};
use awsgd::seeding::{rng, Stream};
use serde::Deserialize;
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Ring,
    Bar,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    LowRank {
        n: usize,
        m: usize,
        rank: usize,
        block_size: usize,
        block_scale: f64,
        seed: u64,
        output: PathBuf,
    },
    ImbalancedLogistic {
        n_pos: usize,
        n_neg: usize,
        dim: usize,
        separation: f64,
        seed: u64,
        output: PathBuf,
    },
    Digits {
        pattern: Pattern,
        rows: usize,
        noise: f64,
        seed: u64,
        output: PathBuf,
    },
    MnistDigit {
        #[serde(default)]
        mnist_dir: Option<PathBuf>,
        digit: u8,
        output: PathBuf,
    },
}

impl DataSpec {
    pub fn output(&self) -> &Path {
        match self {
            DataSpec::LowRank { output, .. }
            | DataSpec::ImbalancedLogistic { output, .. }
            | DataSpec::Digits { output, .. }
            | DataSpec::MnistDigit { output, .. } => output,
        }
    }
}

/// One spec object, or an array of them.
pub fn parse_specs(doc: Value) -> Result<Vec<DataSpec>> {
    let items = match doc {
        Value::Array(items) => items,
        one => vec![one],
    };
    items
        .into_iter()
        .enumerate()
        .map(|(k, v)| serde_json::from_value(v).map_err(|e| CliError::config(format!("spec {k}: {e}"))))
        .collect()
}

pub fn generate(spec: &DataSpec) -> Result<()> {
    let out = spec.output();
    let fail = |source| CliError::Run {
        run: format!("gen-data {}", out.display()),
        source,
    };
    match *spec {
        DataSpec::LowRank {
            n,
            m,
            rank,
            block_size,
            block_scale,
            seed,
            ..
        } => {
            let spec = LowRankSpec {
                n,
                m,
                rank,
                block_size,
                block_scale,
            };
            low_rank(&spec, seed).and_then(|d| d.y.save(out)).map_err(fail)
        }
        DataSpec::ImbalancedLogistic {
            n_pos,
            n_neg,
            dim,
            separation,
            seed,
            ..
        } => {
            let (x, y) = imbalanced_logistic(n_pos, n_neg, dim, separation, seed).map_err(fail)?;
            let file = File::create(out).map_err(|e| CliError::io(out, e))?;
            write_features(BufWriter::new(file), &x, &y).map_err(fail)
        }
        DataSpec::Digits {
            pattern,
            rows,
            noise,
            seed,
            ..
        } => {
            let p = digit_patterns();
            let shape = match pattern {
                Pattern::Ring => &p.ring,
                Pattern::Bar => &p.bar,
            };
            pattern_rows(shape, rows, noise, &mut rng(seed, Stream::Data))
                .and_then(|y| y.save(out))
                .map_err(fail)
        }
        DataSpec::MnistDigit {
            ref mnist_dir,
            digit,
            ..
        } => {
            let dir = mnist_dir
                .clone()
                .or_else(self::mnist_dir)
                .ok_or_else(|| CliError::MissingData(format!("set {MNIST_DIR_ENV} or mnist_dir in the spec")))?;
            let (images, labels) = load_mnist(dir).map_err(fail)?;
            digit_matrix(&images, &labels, digit).and_then(|y| y.save(out)).map_err(fail)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn specs_parse_singly_or_as_a_list() {
        let one = json!({"kind": "digits", "pattern": "bar", "rows": 3, "noise": 0.1, "seed": 1, "output": "b.bin"});
        assert_eq!(parse_specs(one.clone()).unwrap().len(), 1);
        assert_eq!(parse_specs(json!([one.clone(), one])).unwrap().len(), 2);
    }

    #[test]
    fn unknown_kinds_and_fields_are_rejected() {
        assert!(parse_specs(json!({"kind": "cube", "output": "x"})).is_err());
        let extra = json!({"kind": "digits", "pattern": "bar", "rows": 3, "noise": 0.1, "seed": 1, "output": "b", "x": 1});
        assert!(parse_specs(extra).is_err());
    }
}
