//! Shadow-branch decoding and a trace-driven decoupled front-end simulator.

pub mod error;
pub mod isa;
pub mod memory;
pub mod predictors;
pub mod shadow;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
