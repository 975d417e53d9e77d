//! Dense `f64` arrays and a tape-based reverse-mode autodiff engine with the
//! layer vocabulary of the fusion network.
//!
//! Tensors are row-major; image tensors are NHWC. A [`Graph`] records ops as
//! they run and is discarded after one backward sweep. Parameters live in a
//! [`ParamStore`] outside the graph. Forward ops are deterministic: loops run
//! in a fixed order and no op reads shared mutable state.

mod array;
pub mod checkpoint;
mod conv;
mod elementwise;
pub mod gradcheck;
mod graph;
mod linalg;
mod loss;
mod norm;
mod optim;
mod params;
mod reduce;
mod shape;

pub use array::Tensor;
pub(crate) use array::nhwc;
pub use elementwise::{hswish, sigmoid, softmax_in_place};
pub use gradcheck::{grad_check, grad_check_params, GradCheckReport, ABS_TOL, FD_STEP};
pub use graph::{BackFn, Graph, Mode, Var};
pub use norm::{BN_EPS, BN_MOMENTUM};
pub use optim::Adam;
pub use params::{Param, ParamStore};
pub use shape::shuffle_target;
