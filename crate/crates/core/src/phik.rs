//! Physics-informed Kriging: the ensemble GP conditioned on observations.

use alloc::vec::Vec;

use crate::ensemble::{Ensemble, EnsembleGp};
use crate::gp::{Conditioned, Observations, Posterior};
use crate::Result;

/// Conditions `GP(μ_MC, k_MC)` on `obs`. `C_MC` has rank at most `M − 1`,
/// so the ridge escalates automatically when it is singular.
pub fn condition(e: &Ensemble, obs: &Observations, ridge: f64) -> Result<Conditioned<EnsembleGp>> {
    let gp = e.statistics()?;
    gp.check_locations(obs.locations())?;
    Conditioned::new(gp, obs, ridge)
}

pub fn phik_posterior(
    e: &Ensemble,
    obs: &Observations,
    query: &[Vec<f64>],
    ridge: f64,
) -> Result<Posterior> {
    let c = condition(e, obs, ridge)?;
    c.model().check_locations(query)?;
    Ok(c.predict(query))
}
