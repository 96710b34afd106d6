//! Network-flow anomaly detection with tree ensembles and exact Shapley
//! explanations.
//!
//! The crate is organised as a pipeline:
//!
//! * [`dataset`]: labeled feature matrices, stratified splits and folds,
//!   standardization, and a seeded synthetic traffic generator.
//! * [`spectral`]: Haar wavelet decomposition, band energies and spectral
//!   entropy.
//! * [`features`]: 5-second windowing of flow records into the 19-feature
//!   schema.
//! * [`models`]: CART, random forest, gradient boosting, AdaBoost and the
//!   linear/probabilistic/nearest-neighbour baselines.
//! * [`eval`]: ROC curves, AUC with confidence intervals, cross-validation
//!   and the model comparison table.
//! * [`explain`]: path-dependent Tree SHAP, a brute-force Shapley oracle and
//!   the importance / dependence / waterfall products.
//! * [`archive`]: versioned JSON model persistence.

pub mod archive;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod models;
pub mod seed;
pub mod spectral;

pub use error::{Error, Result};
