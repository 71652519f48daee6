//! Benchmarks, regret experiments and acquisition validation for the
//! [`pes`] optimizer.

pub mod config;
pub mod constants;
pub mod error;
pub mod experiment;
pub mod objective;
pub mod regret;
pub mod selftest;
pub mod validate;
pub mod within_model;

pub use error::{HarnessError, Result};
