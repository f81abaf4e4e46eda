//! Modal logical neural networks: differentiable Kripke semantics with
//! learnable accessibility relations.

pub mod autodiff;
pub mod error;
pub mod harness;
pub mod inference;
pub mod kripke;
pub mod learn;
pub mod logic;
pub mod model;

pub use error::{Error, Result};
pub use model::Model;
