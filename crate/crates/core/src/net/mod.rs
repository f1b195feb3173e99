//! Shallow feedforward networks: architectures, data, the quadratic loss and
//! its derivatives.
//!
//! The loss always carries the `1/(2N)` factor, so gradients and Hessians are
//! averages over the dataset.

mod arch;
mod data;
mod hessian;
mod model;

pub use arch::{sigmoid, Activation, NetworkArch, ParamVector, Shape};
pub use data::{format_f64, Dataset, SampleNorms};
pub use hessian::{
    hessian_numeric, hessian_numeric_raw, hessian_numeric_with_cap, max_hessian_eig_sampled,
    sampled_hessian_eigs, stencil_is_smooth, SampleRegion, DEFAULT_HESSIAN_CAP,
};
pub use model::{forward, gradient, loss, LossValue};

pub(crate) use model::{loss_and_gradient_raw, loss_raw};
