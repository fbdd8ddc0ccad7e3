//! Core algorithms for host intrusion detection over system-call traces.
//!
//! The crate is split along the detection pipeline:
//!
//! * [`corpus`] — vocabularies, trace encoding, batching, normal/validation
//!   splits, and a synthetic trace generator for end-to-end tests.
//! * [`lm`] — an LSTM language model over call sequences, trained from
//!   scratch (forward, truncated BPTT, Adam, gradient clipping), plus
//!   per-trace scoring and fixed-size representations.
//! * [`detect`] — thresholding classifiers, the leaky-ReLU score ensemble,
//!   and kNN / k-means baselines over learned representations.
//! * [`eval`] — ROC curves, AUC, and operating-point queries.
//!
//! Everything here is `no_std` + `alloc`: file formats, dataset loaders and
//! the command-line front end live in the companion `tracelm` crate. All
//! randomness flows through explicitly seeded [`rand_chacha::ChaCha8Rng`]
//! instances, so every training run, split, and baseline fit is reproducible
//! bit for bit.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod detect;
pub mod error;
pub mod eval;
pub mod lm;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
