//! Discriminative k-mer mining for discrete sequence classification.
//!
//! A binarized 1D-convolutional encoder is trained on labeled sequences;
//! because each kernel is quantized to one 1 per column, a trained kernel
//! reads back directly as a k-mer. Sequences are then featurized by k-mer
//! Hamming similarity, which coincides exactly with the network's
//! convolution + global max pooling under one-hot encoding, so the feature
//! a classifier sees is the same quantity the encoder was trained on.
//!
//! Modules follow the pipeline: [`data`] (datasets, one-hot, synthetic
//! generator), [`quantize`] (binarization strategies), [`nn`] (numeric
//! core), [`encoder`] (training, extraction, persistence), [`features`]
//! (KH similarity, featurization, equivalence verifier), [`eval`]
//! (classifiers and cross-validation), [`cli`] (the `hamenc` binary).

pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod features;
pub mod nn;
pub mod quantize;
mod util;

pub use error::{Error, Result};
