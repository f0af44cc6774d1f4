//! Attention-based LSTM captioning over precomputed frame features, with a
//! train-time guidance branch that encodes past predictions and future
//! groundtruth words, plus BLEU-4 / ROUGE-L / CIDEr evaluation.
//!
//! The crate is layered bottom-up:
//!
//! - [`autodiff`]: dense `f64` tensors and a define-by-run reverse-mode graph.
//! - [`layers`]: parameter store, linear / embedding / LSTM / additive
//!   attention layers, Adam.
//! - [`model`]: the captioning model in its three modes (`SA`, `SA_LN`,
//!   `GMNET`), training, greedy decoding and checkpoints.
//! - [`metrics`]: corpus-level caption metrics.
//! - [`corpus`]: vocabulary, caption and feature files, synthetic corpora.
//! - [`parallel`]: ordered data-parallel map used for per-sample gradients.

pub mod autodiff;
pub mod corpus;
mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod parallel;

pub use error::{Error, Result};
