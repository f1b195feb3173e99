//! Step sizes for gradient descent on small neural networks, derived from
//! upper bounds on the gradient-Lipschitz constant of the quadratic loss.
//!
//! The pieces:
//!
//! * [`net`]: architectures, datasets, loss, gradient and a finite-difference
//!   Hessian used as ground truth.
//! * [`bounds`]: closed-form Lipschitz bounds `alpha` and the step `1/alpha`.
//! * [`eigen`]: power iteration plus Gershgorin and Brauer eigenvalue bounds.
//! * [`optim`]: full-batch gradient descent and adaptive baselines.
//! * [`tuner`]: a binary search over step sizes seeded by `1/alpha`, and
//!   random search for comparison.
//! * [`experiments`]: teacher-student data and head-to-head comparisons.

pub mod bounds;
pub mod cli;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod net;
pub mod optim;
pub mod tuner;

pub use bounds::{lipschitz_report, BoundMethod, LipschitzReport};
pub use error::{Error, Result};
pub use net::{Activation, Dataset, NetworkArch, ParamVector};
pub use optim::{gd_train, OptimizerConfig, TrainTrace};
