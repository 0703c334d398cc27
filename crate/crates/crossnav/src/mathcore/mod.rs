//! Deterministic differentiable building blocks.
//!
//! Plain `f64` vectors and matrices, a stable softmax, dot-product
//! attention, a 4-gate LSTM cell, Adam, seeded dropout, and a central
//! finite-difference gradient checker. All forward passes are pure; all
//! backward passes are hand-derived and verified against the checker.

pub mod adam;
pub mod dropout;
pub mod gradcheck;
pub mod init;
pub mod ops;
pub mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use dropout::{mix_seed, mix_seed3, Mode};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use ops::{
    affine, attention_forward, dot_product_attention, lstm_forward, lstm_step, softmax,
    AttentionParams,
};
pub use tensor::{ParamSet, Tensor};
