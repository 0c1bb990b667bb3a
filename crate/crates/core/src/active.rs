//! Greedy active learning: observe next where the posterior MSE peaks.

use alloc::string::String;
use alloc::vec::Vec;

use crate::gp::{Observations, Posterior};
use crate::linalg::norm2;
use crate::methods::Regressor;
use crate::{Error, Result};

/// One fit of the loop.
#[derive(Clone, Debug)]
pub struct ActiveStep {
    pub observations: Observations,
    /// Posterior on the evaluation grid.
    pub posterior: Posterior,
    /// `‖F_r − F‖_F / ‖F‖_F` against the reference field.
    pub relative_error: f64,
    /// Grid index and location chosen after this fit, if any.
    pub acquired: Option<(usize, Vec<f64>)>,
}

/// Index of the largest `mse` among nodes that are not yet observed; ties
/// go to the lowest index.
pub fn acquisition_index(grid: &[Vec<f64>], mse: &[f64], obs: &Observations) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, x) in grid.iter().enumerate() {
        if obs.contains(x) {
            continue;
        }
        match best {
            Some(b) if !(mse[i] > mse[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn relative_error(estimate: &[f64], truth: &[f64]) -> f64 {
    norm2(&crate::linalg::sub(estimate, truth)) / norm2(truth)
}

/// Fits, scores against `truth` (values on `grid`), acquires at the MSE
/// maximizer and repeats until `n_max` observations. The history has one
/// entry per fit; the last one has no acquisition.
pub fn run_active_loop<R: Regressor + ?Sized>(
    regressor: &R,
    initial: Observations,
    mut oracle: impl FnMut(&[f64]) -> core::result::Result<f64, String>,
    grid: &[Vec<f64>],
    truth: &[f64],
    n_max: usize,
) -> Result<Vec<ActiveStep>> {
    if n_max < initial.len() {
        return Err(Error::InvalidArgument(alloc::format!(
            "n_max = {n_max} is below the {} initial observations",
            initial.len()
        )));
    }
    if truth.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: truth.len(),
            context: "reference field",
        });
    }
    let mut obs = initial;
    let mut history = Vec::new();
    loop {
        let posterior = regressor.fit_predict(&obs, grid)?;
        let relative_error = relative_error(&posterior.mean, truth);
        if obs.len() >= n_max {
            history.push(ActiveStep {
                observations: obs,
                posterior,
                relative_error,
                acquired: None,
            });
            return Ok(history);
        }
        let idx = acquisition_index(grid, &posterior.mse, &obs).ok_or(Error::ExhaustedCandidates)?;
        let x = grid[idx].clone();
        let y = oracle(&x).map_err(|message| Error::OracleFailure { index: idx, message })?;
        let next = {
            let mut o = obs.clone();
            o.push(x.clone(), y)?;
            o
        };
        history.push(ActiveStep {
            observations: obs,
            posterior,
            relative_error,
            acquired: Some((idx, x)),
        });
        obs = next;
    }
}
