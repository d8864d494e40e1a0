// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod laplacian;
mod linalg;
pub mod metrics;
pub mod objective;
pub mod polar;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::spectral_norm;
