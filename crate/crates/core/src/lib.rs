//! Unreliable-news classification toolkit.
//!
//! The pipeline runs corpus loading ([`corpus`]), tokenization
//! ([`tokenization`]), classifiers ([`models`]), deterministic training and
//! sweeps ([`training`]), then probability ensembling and rank-based AUC
//! ([`eval`]). The [`cli`] module exposes all of it as one command.

pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod error;
pub mod kv;
pub mod models;
pub mod rng;
pub mod tokenization;
pub mod training;

pub use error::{Error, Result};
