//! Product categorisation from tabular catalog data.
//!
//! The pipeline encodes string columns with Min-Hash signatures, fills
//! missing cells by nearest-neighbour imputation, rebalances skewed classes
//! with SMOTE and random undersampling, and trains one classifier per target
//! (k-nearest neighbours, random forest, or gradient-boosted trees). The
//! [`ensemble`] module ties these together and persists fitted models; the
//! `prodcat` binary exposes the pipeline on the command line.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod encoding;
pub mod ensemble;
pub mod error;
pub mod forest;
pub mod gbt;
pub mod imputation;
pub mod knn;
pub mod labels;
pub mod matrix;
pub mod metrics;
pub mod resampling;
pub mod rng;

pub use error::{Error, Result};
pub use labels::Labels;
pub use matrix::Matrix;
