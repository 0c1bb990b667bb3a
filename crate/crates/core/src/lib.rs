//! Physics-informed Gaussian process regression with multifidelity ensembles.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerical core:
//!
//! * [`linalg`]: dense Cholesky and pivoted Cholesky factorizations, spectral norms.
//! * [`gp`]: stationary Gaussian-kernel Kriging, log marginal likelihood, the
//!   generic GP posterior shared by every method.
//! * [`cokriging`]: two-level auto-regressive CoKriging.
//! * [`ensemble`] and [`phik`]: ensemble-statistics priors (PhIK).
//! * [`cophik`]: CoKriging with an ensemble-statistics low-fidelity GP.
//! * [`bifidelity`]: low-fidelity snapshot selection and lifting to build an
//!   approximate high-fidelity ensemble.
//! * [`bounds`]: evaluation of the PhIK/BiPhIK error-bound constants and
//!   inequalities.
//! * [`active`]: greedy maximum-variance acquisition.
//!
//! IO, experiment models and the command line live in the companion `phik` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod active;
pub mod bifidelity;
pub mod bounds;
pub mod cokriging;
pub mod cophik;
pub mod ensemble;
pub mod error;
pub mod gp;
pub mod grid;
pub mod linalg;
pub mod methods;
pub mod optim;
pub mod phik;

pub use error::{Error, Result};
