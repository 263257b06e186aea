//! Simple multilinear (SML) nonlinear adaptive filtering.
//!
//! The SML filter models its output as the product of K FIR filter outputs,
//! `y(i) = (u_i·w_1)⋯(u_i·w_K)`, which is a homogeneous Volterra filter with
//! a rank-one kernel `w_1 ⊗ ⋯ ⊗ w_K`. The crate provides
//!
//! - [`tensor_kron`]: dense Kronecker/tensor utilities used as reference,
//! - [`sml_model`]: O(KM) evaluation of the filter,
//! - [`mse_surface`]: the MSE cost, its gradient and normal-equation residual,
//! - [`adaptive`]: SML-LMS and a Volterra-LMS baseline with operation counts,
//! - [`simkit`]: system-identification experiments and EMSE learning curves,
//! - [`verify`]: a self-check suite over the identities above.

pub mod adaptive;
pub mod error;
pub mod mse_surface;
pub mod simkit;
pub mod sml_model;
pub mod tensor_kron;
pub mod verify;

pub use error::{Error, Result};
