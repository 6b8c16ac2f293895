//! Minimal differentiable kernels plus the finite-difference harness that
//! arbitrates every analytic gradient in the crate.

pub mod gradcheck;
pub mod ops;

pub use gradcheck::{grad_check, FlatParams, GradCheckReport, ParamTensors, DEFAULT_FD_STEP};
pub use ops::{
    bce_masked, bce_masked_grad_logits, layer_norm, linear, relu, sigmoid, sigmoid_scalar,
    softmax_masked, BCE_CLAMP,
};
