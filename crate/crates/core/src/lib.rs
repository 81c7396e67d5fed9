//! Cartesian genetic programming (CGP) and recurrent CGP binary classifiers
//! with the full experiment harness around them: stratified splitting,
//! ADASYN training-set balancing, (1+lambda) evolution, repeated stratified
//! k-fold cross-validation, reference MLP/SVM baselines, a synthetic data
//! generator, and white-box decoding of evolved graphs to expressions and
//! DOT.

pub mod adasyn;
pub mod baselines;
pub mod crossval;
pub mod datagen;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod evolution;
pub mod seed;

pub use error::{Error, Result};
