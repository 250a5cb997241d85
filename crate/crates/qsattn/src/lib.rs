//! Quaternion self-attention with shared scores.
//!
//! This crate implements and cross-checks two quaternion self-attention
//! formulations over split-plane tensors:
//!
//! * **shared-score** attention: a single real score matrix from the
//!   quaternion inner product (four real matrix products, one softmax, one
//!   attention map applied to all four value planes), and
//! * **component-wise** attention: the quaternion-valued Hamilton-product
//!   score (sixteen real matrix products, four softmaxes, four maps).
//!
//! Alongside the kernels it ships the verification machinery: inner-product
//! axioms, score-decomposition identities, analytic-vs-numeric gradient
//! checks, agreement and distribution-similarity statistics, an analytic
//! MACs model, and a timing harness. The `qsattn` binary exposes all of it
//! on the command line.

// Per-component loops index several parallel four-plane arrays; an index is
// the clearest way to write them.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod attention;
pub mod bench;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod matrix;
pub mod qtb;
pub mod quat;
pub mod report;
pub mod rng;
pub mod selftest;
pub mod tensor;

pub use error::{Error, Result};
pub use matrix::Mat;
pub use quat::Quaternion;
pub use rng::Rng;
pub use tensor::QTensor;
