//! Helpers shared by the integration tests.

#![allow(dead_code)]

pub mod grad_cases;
pub mod oracles;
pub mod parity;
pub mod reference;
