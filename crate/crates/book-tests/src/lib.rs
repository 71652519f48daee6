//! The chapters of the guide in `book/`, included so that their code blocks
//! run under `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/gaussian-processes.md")]
pub mod gaussian_processes {}
#[doc = include_str!("../../../book/src/random-features.md")]
pub mod random_features {}
#[doc = include_str!("../../../book/src/conditioning.md")]
pub mod conditioning {}
#[doc = include_str!("../../../book/src/hyperparameters.md")]
pub mod hyperparameters {}
#[doc = include_str!("../../../book/src/acquisition.md")]
pub mod acquisition {}
#[doc = include_str!("../../../book/src/validation.md")]
pub mod validation {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
