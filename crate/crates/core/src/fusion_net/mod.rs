//! The two-branch fusion network: an image backbone over the time-frequency
//! image, a convolutional branch over the folded ZC correlation matrix,
//! cross-modal interaction ([`mmfi`]), single-modal fusion ([`smff`]), cross
//! attention ([`mmff`]), adaptive feature weighting ([`afw`]) and a
//! max-softmax OOD head.

pub mod afw;
pub mod branches;
pub mod checkpoint;
mod config;
pub mod data;
mod layers;
pub mod mmff;
pub mod mmfi;
mod model;
pub mod ood;
pub mod smff;
pub mod train;

pub use afw::{afw_apply, omega, ClassAccumulator, ClassStats};
pub use branches::{extract_image, extract_zc, fold_zc};
pub use checkpoint::{load_model, save_model};
pub use config::{Arch, BlockSpec, NetConfig};
pub use data::{batch_inputs, Inputs, Sample};
pub use mmff::mmff;
pub use mmfi::{mmfi, MmfiOut};
pub use model::{Forward, FusionNet};
pub use ood::{msp, ood_decide, predicted_class, Decision, OodPolicy};
pub use smff::smff;
pub use train::{accuracy, fused_stats, train, EpochLog, TrainConfig, TrainLog};
