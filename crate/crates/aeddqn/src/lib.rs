//! Dataset parsing, file formats, configuration and the experiment commands
//! built on `aeddqn-core`.

pub mod commands;
pub mod config;
pub mod dataset;
mod error;
pub mod formats;
pub mod output;

pub use error::{Error, Result};
