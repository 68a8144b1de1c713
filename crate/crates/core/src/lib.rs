//! Range-only exploration simulator and off-policy RL toolkit.

pub mod env;
pub mod error;
pub mod nn;
pub mod replay;
pub mod vehicle;
pub mod worldmap;

pub use error::{Error, Result};
