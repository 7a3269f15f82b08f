//! Chemometrics classification toolkit for hyperspectral honey data.
//!
//! The library implements a two-stage detector: a botanical-origin
//! identification stage followed by a per-origin adulteration-level stage.
//! Both stages pair a linear feature extractor (LDA or PCA) with a
//! distance- or margin-based classifier (KNN or SVM). Evaluation uses
//! balanced accuracy under group-aware k-fold cross-validation so that
//! spectra from one source image never straddle a train/test split.
//!
//! Modules:
//! - [`dataset`]: the spectral data model, delimited-text I/O, validation,
//!   synthetic generation and standardization.
//! - [`dimred`]: PCA and LDA projections.
//! - [`classify`]: KNN and SVM behind one fit/predict contract.
//! - [`stage`]: a feature extractor + classifier bundle fitted as a unit.
//! - [`eval`]: balanced accuracy, confusion matrices, grouped fold plans
//!   and the cross-validation runner.
//! - [`pipeline`]: the hierarchical origin/adulteration model, its
//!   evaluation tables and binary persistence.
//! - [`report`]: deterministic markdown/delimited report rendering.

pub mod classify;
pub mod dataset;
pub mod dimred;
pub mod eval;
pub mod linalg;
pub mod pipeline;
pub mod report;
pub mod stage;

pub use dataset::{SpectralDataset, SpectrumRecord, Standardizer, SynthSpec, WavelengthGrid};
pub use linalg::Mat;
