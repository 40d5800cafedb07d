//! Phishing URL classification with a "bag of bytes" URL vector.
//!
//! A URL is split into its host and path, each part is turned into a
//! histogram over byte values (the characters themselves plus the bytes
//! formed by straddling every pair of neighbouring characters at a 4-bit
//! offset), and the two L2-normalized histograms are concatenated into a
//! 512-dimensional vector. A three-layer dense network with ReLU and
//! dropout classifies the vector as benign or malicious.
//!
//! The crate covers the whole pipeline:
//!
//! - [`vectorizer`]: URL splitting, byte extraction, histograms, [`UrlVector`].
//! - [`nn`]: the 512→256→256→2 network with exact forward and backward passes.
//! - [`optim`]: SGD, Adam and AdaDelta update rules.
//! - [`dataset`]: PhishTank dumps, URL lists, access logs, cleansing, balanced sampling, splits.
//! - [`trainer`]: the minibatch training loop and per-epoch learning curves.
//! - [`metrics`]: confusion matrix, precision/recall/F-measure, ROC and AUC.
//! - [`model_io`]: the `BOBURL 1` text model format.
//! - [`synthetic`]: deterministic generator of two separable URL families for smoke runs.
//!
//! Labels are fixed project-wide: benign is `0`, malicious is `1`.

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model_io;
pub mod nn;
pub mod optim;
pub mod synthetic;
pub mod trainer;
pub mod vectorizer;

pub use dataset::{Dataset, Label, LabeledUrl};
pub use error::{Error, Result};
pub use nn::MlpModel;
pub use optim::{OptimizerConfig, OptimizerKind};
pub use trainer::TrainConfig;
pub use vectorizer::{vectorize, UrlVector, VECTOR_DIM};
