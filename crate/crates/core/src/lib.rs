//! Adaptive weighted stochastic gradient descent.
//!
//! SGD where the distribution used to pick training examples is itself a
//! parametric family `Q_tau`, learned online by descending the variance of the
//! density-weighted gradient. The crate contains:
//!
//! * [`sampler`]: the sampling families (label bias, softmax product over
//!   matrix cells, tabular softmax policies) with draw, density and score.
//! * [`mvis`]: minimal-variance importance sampling for estimating `E_P[f]`.
//! * [`optimizer`]: AW-SGD, the uniform SGD baseline, step-size schedules and
//!   the run loop with its CSV metrics sink.
//! * [`tasks`]: matrix factorization, imbalanced logistic regression and an
//!   off-policy gridworld.
//! * [`timeaware`]: the time-aware variant that divides the sampler update by
//!   the per-sample access time, plus the simulated access-cost model.
//! * [`data`]: synthetic generators, the MNIST IDX parser and file formats.

pub mod data;
mod error;
pub mod math;
pub mod mvis;
pub mod optimizer;
pub mod sampler;
pub mod seeding;
pub mod stats;
pub mod tasks;
pub mod timeaware;

pub use error::{Error, Result};
pub use optimizer::{AwSgd, ModelState, Schedule, Sgd, StepRecord, StepSize};
pub use sampler::{Draw, LabelBias, PolicyTable, Sampler, SoftmaxProduct};
pub use tasks::{SparseGrad, Task};
