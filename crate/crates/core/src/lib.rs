//! Out-of-distribution detection for drone RF signals by fusing Zadoff-Chu
//! correlation features with time-frequency images.
//!
//! The crate is organised along the processing chain:
//!
//! * [`signal_synth`] generates labelled complex-baseband records,
//! * [`features`] turns a record into a time-frequency image and a ZC
//!   correlation matrix,
//! * [`tensor`] is a small reverse-mode autodiff engine,
//! * [`fusion_net`] holds the two-branch network with its interaction,
//!   fusion and adaptive weighting stages,
//! * [`eval`] computes metrics, ablations and robustness sweeps.

pub mod error;
pub mod eval;
pub mod exec;
pub mod features;
pub mod fusion_net;
pub mod signal_synth;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Exec;
