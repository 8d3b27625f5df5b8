//! Ordinal outcome models, metrics, cross-validation and token attribution.

pub mod cohort;
pub mod error;
pub mod importance;
pub mod metrics;
pub mod models;
pub mod outcome;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod synthetic;
pub mod tokenizer;
pub mod validation;
