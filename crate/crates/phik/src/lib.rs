//! Experiments, file formats and command line around `phik-core`.
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod models;
pub use error::{Error, Result};
