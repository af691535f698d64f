//! Flow-based DDoS detection toolkit.
//!
//! The pipeline runs ingest → clean → binarize → scale → hybrid feature
//! selection → split → train → evaluate → explain. Each stage is a plain
//! function over immutable inputs so it can be audited on its own:
//!
//! - [`flowdata`]: CSV loading, NaN/infinity cleaning, label binarization.
//! - [`scaling`]: z-score standardisation.
//! - [`stats`]: Pearson, Spearman, Kendall τ-b, entropy, information gain.
//! - [`hybridselect`]: the three-step correlation / information-gain selector.
//! - [`classifiers`]: CART, random forest, gradient-boosted trees, k-NN.
//! - [`evaluation`]: stratified split, k-fold CV, confusion-matrix metrics.
//! - [`explain`]: gain-based feature importance and the combined report.
//! - [`synth`]: Gaussian synthetic flows with known informative features.
//! - [`pipeline`]: configuration and end-to-end orchestration.

pub mod classifiers;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod flowdata;
pub mod hybridselect;
pub mod pipeline;
pub mod scaling;
pub mod stats;
pub mod synth;

mod numeric;

pub use error::{Error, Result, Stage, StageExt};
pub use flowdata::Dataset;

/// Version stamped into every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
