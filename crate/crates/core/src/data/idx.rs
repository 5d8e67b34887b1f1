//! The big-endian IDX container used by the MNIST files.

use std::path::{Path, PathBuf};

use super::Matrix;
use crate::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Environment variable naming the directory holding the MNIST files.
pub const MNIST_DIR_ENV: &str = "AWSGD_MNIST_DIR";

const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Idx {
    Images {
        rows: usize,
        cols: usize,
        /// Row-major pixels, one image after another.
        pixels: Vec<u8>,
    },
    Labels(Vec<u8>),
}

impl Idx {
    pub fn len(&self) -> usize {
        match self {
            Idx::Images { rows, cols, pixels } => pixels.len() / (rows * cols).max(1),
            Idx::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Images as an `count x (rows * cols)` matrix with pixels scaled to
    /// `[0, 1]`.
    pub fn to_matrix(&self) -> Result<Matrix> {
        match self {
            Idx::Images { rows, cols, pixels } => Matrix::from_vec(
                self.len(),
                rows * cols,
                pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
            ),
            Idx::Labels(_) => Err(Error::DimensionMismatch("label file has no pixel matrix".into())),
        }
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or(Error::TruncatedPayload {
            expected: at + 4,
            actual: bytes.len(),
        })
}

pub fn parse_idx(bytes: &[u8]) -> Result<Idx> {
    let magic = be_u32(bytes, 0)?;
    let (dims, header) = match magic {
        IMAGES_MAGIC => (vec![be_u32(bytes, 4)?, be_u32(bytes, 8)?, be_u32(bytes, 12)?], 16),
        LABELS_MAGIC => (vec![be_u32(bytes, 4)?], 8),
        other => return Err(Error::BadMagic(other)),
    };
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .and_then(|p| p.checked_add(header))
        .ok_or_else(|| Error::DimensionMismatch(format!("dimensions {dims:?} overflow")))?;
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::DimensionMismatch(format!(
            "declared dimensions {dims:?} cover {} payload bytes, found {}",
            expected - header,
            bytes.len() - header
        )));
    }
    let payload = bytes[header..].to_vec();
    Ok(match magic {
        IMAGES_MAGIC => Idx::Images {
            rows: dims[1] as usize,
            cols: dims[2] as usize,
            pixels: payload,
        },
        _ => Idx::Labels(payload),
    })
}

pub fn serialize_idx(idx: &Idx) -> Vec<u8> {
    let mut out = Vec::new();
    match idx {
        Idx::Images { rows, cols, pixels } => {
            out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
            for d in [idx.len(), *rows, *cols] {
                out.extend_from_slice(&(d as u32).to_be_bytes());
            }
            out.extend_from_slice(pixels);
        }
        Idx::Labels(labels) => {
            out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
            out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
            out.extend_from_slice(labels);
        }
    }
    out
}

/// Rows of `images` whose label is `digit`, in file order.
pub fn digit_matrix(images: &Idx, labels: &Idx, digit: u8) -> Result<Matrix> {
    let (Idx::Images { rows, cols, pixels }, Idx::Labels(labels)) = (images, labels) else {
        return Err(Error::DimensionMismatch("expected an image file and a label file".into()));
    };
    if images.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    let size = rows * cols;
    let data: Vec<f64> = labels
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l == digit)
        .flat_map(|(k, _)| pixels[k * size..(k + 1) * size].iter().map(|&p| f64::from(p) / 255.0))
        .collect();
    Matrix::from_vec(data.len() / size.max(1), size, data)
}

/// Directory named by [`MNIST_DIR_ENV`], if set and present.
pub fn mnist_dir() -> Option<PathBuf> {
    std::env::var_os(MNIST_DIR_ENV)
        .map(PathBuf::from)
        .filter(|p| p.join(TRAIN_IMAGES).is_file() && p.join(TRAIN_LABELS).is_file())
}

/// Training images and labels from an MNIST directory.
pub fn load_mnist(dir: impl AsRef<Path>) -> Result<(Idx, Idx)> {
    let dir = dir.as_ref();
    let images = parse_idx(&std::fs::read(dir.join(TRAIN_IMAGES))?)?;
    let labels = parse_idx(&std::fs::read(dir.join(TRAIN_LABELS))?)?;
    Ok((images, labels))
}
