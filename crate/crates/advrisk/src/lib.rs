//! Estimation of the probability that an adversarial attack on a
//! classifier causes damage: a successful perturbation that the operator
//! does not detect.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`attack`] perturbs every observation of a sample with a fixed set
//!    of attacks against a model and reduces the results to one smallest
//!    successful perturbation size per observation (`inf` when nothing
//!    succeeded).
//! 2. [`detection`] models the probability that a perturbation of a given
//!    size goes unnoticed, either as an explicit function (step, logistic,
//!    table) or implicitly as the average attack success over a pool of
//!    comparable models.
//! 3. [`estimators`] integrates the detection function over the recorded
//!    perturbation sizes to estimate damage probability, attack success
//!    rates and perturbation statistics; [`bootstrap`] wraps those
//!    estimators in resampled confidence bands.
//!
//! [`models`] supplies small trainable classifiers and synthetic datasets
//! so the whole pipeline can run end to end without external data, and
//! [`io`] defines the deterministic text formats the CLI exchanges.
//!
//! All types are immutable after construction and all estimators are pure
//! functions, so values can be shared freely across threads. Every source
//! of randomness takes an explicit seed; equal seeds give equal results,
//! including byte-identical output files.

pub mod attack;
pub mod bootstrap;
pub mod detection;
pub mod domain;
pub mod error;
pub mod estimators;
pub(crate) mod hash;
pub mod io;
pub mod models;

pub use error::{Error, Result};

/// Seed-substream labels used by the CLI so one `--seed` drives all
/// randomness without coupling the streams.
pub mod seeds {
    pub use crate::hash::{derive_indexed_seed, derive_seed};

    pub const TRAIN: &str = "train";
    pub const ATTACK: &str = "attack";
    pub const BOOTSTRAP: &str = "bootstrap";
    pub const DETECTOR: &str = "detector";
    pub const GENERATE: &str = "generate";
}
