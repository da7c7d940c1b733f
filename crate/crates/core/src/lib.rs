//! Patch-based normal estimation for unstructured point clouds.
//!
//! The crate covers the whole pipeline: a small reverse-mode autodiff engine
//! ([`tensor`]), point-cloud I/O and synthetic shapes ([`data`]), fixed-size
//! patch sampling with plane labels ([`patch`]), classical estimators
//! ([`baselines`]), the single- and multi-scale networks ([`models`]),
//! training loops ([`trainer`]) and the angle-RMSE evaluation ([`eval`]).

pub mod baselines;
pub mod cli;
pub mod data;
mod error;
pub mod eval;
pub mod models;
pub mod patch;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
