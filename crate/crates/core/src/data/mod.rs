//! Synthetic generators, the MNIST IDX container and file formats.

mod digits;
mod features;
mod generators;
mod idx;
mod matrix;
mod nonstationary;

pub use digits::{digit_patterns, pattern_rows, DigitPatterns, IMAGE_SIDE, PIXELS};
pub use features::{read_features, write_features};
pub use generators::{imbalanced_logistic, low_rank, LowRank, LowRankSpec};
pub use idx::{digit_matrix, load_mnist, mnist_dir, parse_idx, serialize_idx, Idx, MNIST_DIR_ENV};
pub use matrix::Matrix;
pub use nonstationary::NonStationary;
