//! Noise-robustness benchmarking for text classifiers.
//!
//! Injects controlled text and label noise into labeled corpora, trains two
//! linear text classifiers, and compares cross-validation accuracy measured on
//! the noisy training data with accuracy on a clean held-out split.

pub mod corpus;
pub mod eval;
pub mod fixtures;
pub mod models;
pub mod noise;
pub mod seed;
pub mod text;
