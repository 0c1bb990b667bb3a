//! Built-in experiment problems.

pub mod branin;
pub mod ks;
