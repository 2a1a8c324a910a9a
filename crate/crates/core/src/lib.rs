//! Convolution-quadrature solvers for coupled linear/nonlinear
//! differential-algebraic systems.
//!
//! The linear time-invariant part `E z' + A z = B y` is eliminated through
//! its transfer function, and the remaining integro-differential algebraic
//! equation is integrated with BDF or Radau IIA convolution quadrature.

pub mod circuit;
pub mod cli;
pub mod em_device;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod lti;
pub mod run;
pub mod steppers;
pub mod weights;

pub use error::{Error, Result};
