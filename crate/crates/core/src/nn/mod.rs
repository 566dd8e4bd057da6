//! Minimal dense-network stack: feed-forward layers with a hand-written
//! reverse pass, RMSProp/Adam, weight clipping and a finite-difference
//! gradient checker.

mod gradcheck;
mod mlp;
mod optim;

pub use gradcheck::{grad_check, grad_check_with};
pub use mlp::{
    backward, forward, mlp_init, Activation, ForwardCache, Gradients, Layer, MlpSpec,
    OutputActivation, ParamSet, INIT_STREAM,
};
pub use optim::{Direction, OptimizerKind, OptimizerState};
