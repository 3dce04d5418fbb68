//! Single-pass anomaly detection for multivariate streams by online
//! decorrelation learning.
//!
//! * [`detector`]: the streaming detector (`R` update and momentum score).
//! * [`autotune`]: burn-in learning-rate selection.
//! * [`synth`]: synthetic Gaussian scenarios and covariance diagnostics.
//! * [`tuning`]: JSD-based validation subset and grid search.
//! * [`eval`]: ROC AUC, normalized AUC and the benchmark runner.
//! * [`dataset`]: labeled datasets and CSV I/O.

// Checks written as `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autotune;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod eval;
pub mod synth;
pub mod tuning;

pub use autotune::{AutoDetector, AutoTuneConfig};
pub use dataset::LabeledDataset;
pub use detector::{Detector, DetectorConfig};
pub use error::{Error, Result};
