//! Attribution toolkit for small dense networks.
//!
//! The crate bundles a minimal tensor core, a feedforward engine with
//! recorded traces and three backward modes, data-driven pattern estimation,
//! eleven attribution methods behind one interface, a signal/distractor
//! stress lab, a trainer for a synthetic image task, and a patch-degradation
//! benchmark for comparing attribution methods.

pub mod attribution;
mod compensated;
pub mod degradation;
pub mod error;
pub mod network;
pub mod patterns;
pub mod rng;
pub mod stress;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::Tensor;
