//! Adaptive generator/discriminator update scheduling for Wasserstein GANs.
//!
//! The scheduler compares the relative one-step change of the generator and
//! critic losses and trains whichever component's loss is moving faster
//! (weighted by a coefficient `lambda`). The crate bundles everything needed
//! to study that rule at desk scale:
//!
//! * [`sched`]: loss-change ratios, the adaptive decision rule and the fixed
//!   `n_d:n_g` baseline.
//! * [`dirac`]: the closed-form Dirac-GAN dynamical system.
//! * [`nn`]: a minimal dense network stack with reverse-mode gradients,
//!   RMSProp/Adam and weight clipping.
//! * [`data`]: seeded synthetic 2-D distributions and latent noise.
//! * [`metrics`]: exact 1-D W1 and sliced Wasserstein distances.
//! * [`train`]: the WGAN training loop, histories and checkpoints.
//! * [`config`]: the `key = value` run configuration shared by all tools.

pub mod config;
pub mod data;
pub mod dirac;
mod error;
pub mod metrics;
pub mod nn;
pub mod sched;
pub mod tensor;
pub mod textfmt;
pub mod train;

pub use error::{Error, Result};
pub use sched::UpdateTarget;
pub use tensor::Tensor2;
