//! Privacy-preserving outsourced data-driven stabilization of unknown
//! discrete-time LTI systems.
//!
//! The pipeline: collect input-state data from the unknown plant, mask the
//! input channel with secret random keys ([`transform`]), ship only the
//! masked matrices to an untrusted solver that maximizes a robustness
//! radius and returns a gain ([`synth`] over [`qmi`] sets and the [`lmi`]
//! machinery), then unmask the gain with a second key pair drawn inside
//! that radius. [`audit`] verifies mechanically what the solver's side can
//! and cannot identify, and [`adversary`] measures how the masking degrades
//! model-based bias-injection attacks against a norm-threshold detector.

pub mod adversary;
pub mod audit;
pub mod error;
pub mod exchange;
pub mod linalg;
pub mod lmi;
pub mod matcsv;
pub mod plant;
pub mod qmi;
pub mod synth;
pub mod transform;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
