//! Augmentation policy search for small grayscale image classifiers.
//!
//! The crate covers the whole loop: a transform catalog with a shared
//! magnitude, a non-linear mixed-example generator, a soft-label trainer,
//! affinity/diversity diagnostics, and a grid search over the policy
//! hyperparameters `(m, n)`.

pub mod config;
pub mod dataset;
pub mod error;
pub mod image;
pub mod label;
pub mod metrics;
pub mod mixer;
pub mod policy;
pub mod rng;
pub mod search;
pub mod synth;
pub mod trainer;
pub mod transforms;

pub use config::{MixerKind, PolicyConfig, Variant};
pub use dataset::{DatasetSplit, LabeledExample};
pub use error::{Error, Result};
pub use image::{image_stats, GrayImage};
pub use label::SoftLabel;
pub use mixer::{MixLambdas, MixedExample};
pub use rng::seeded_rng;
