//! CoKriging whose low-fidelity GP is the ensemble GP, with the
//! low-fidelity data chosen among the ensemble members.

use alloc::vec::Vec;

use crate::cokriging::{better, CoKrigingModel, RhoGrid, RhoScore};
use crate::ensemble::{Ensemble, EnsembleGp};
use crate::gp::{fit_ordinary_kriging, GpModel, HyperSearchConfig, Observations, Posterior};
use crate::linalg::Cholesky;
use crate::Result;

#[derive(Clone, Debug)]
pub struct CoPhikFit {
    pub model: CoKrigingModel<EnsembleGp>,
    /// Index of the member used as `y_L`.
    pub member: usize,
    /// `ỹ = (u^member(X); y_H)`
    pub y_tilde: Vec<f64>,
}

impl CoPhikFit {
    pub fn posterior(&self, query: &[Vec<f64>], ridge: f64) -> Result<Posterior> {
        self.model.ensemble_check(query)?;
        Ok(self.model.condition(&self.y_tilde, ridge)?.predict(query))
    }
}

impl CoKrigingModel<EnsembleGp> {
    fn ensemble_check(&self, query: &[Vec<f64>]) -> Result<()> {
        self.low.check_locations(query)
    }
}

/// Fits CoPhIK with `X_L = X_H`:
/// `Y_L = GP(μ_MC, k_MC)`; for each `ρ`, `Y_d` is fitted to
/// `y_H − ρ μ_L(X)` and every member `u^m(X)` is scored as `y_L` by `ln L̃`.
/// The best `(ρ, member)` pair wins; ties keep the lowest `ρ` on the grid,
/// then the lowest member index.
pub fn fit_cophik(
    e: &Ensemble,
    high_obs: &Observations,
    search: &HyperSearchConfig,
    rho_grid: &RhoGrid,
    ridge: f64,
) -> Result<CoPhikFit> {
    fit_cophik_with_prior(e.statistics()?, e, high_obs, search, rho_grid, ridge)
}

/// As [`fit_cophik`], with the prior `Y_L` given separately from the
/// candidate set searched for `y_L`.
pub fn fit_cophik_with_prior(
    low: EnsembleGp,
    e: &Ensemble,
    high_obs: &Observations,
    search: &HyperSearchConfig,
    rho_grid: &RhoGrid,
    ridge: f64,
) -> Result<CoPhikFit> {
    let x = high_obs.locations().to_vec();
    low.check_locations(&x)?;
    let mu_l = low.mean_vector(&x);
    let members: Vec<Vec<f64>> = (0..e.len())
        .map(|m| x.iter().map(|p| e.member_at(m, p)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;

    let mut best: Option<CoPhikFit> = None;
    let mut scores: Vec<RhoScore> = Vec::new();
    let mut evaluate = |rho: f64, best: &mut Option<CoPhikFit>| -> Result<()> {
        let y_d: Vec<f64> = high_obs
            .values()
            .iter()
            .zip(&mu_l)
            .map(|(h, m)| h - rho * m)
            .collect();
        let fit = fit_ordinary_kriging(&high_obs.with_values(y_d)?, search)?;
        let mut model = CoKrigingModel::new(rho, low.clone(), fit.model, x.clone(), x.clone())?;
        model.delta_degenerate = fit.degenerate;
        model.delta_log_likelihood = fit.log_likelihood;
        let chol = if fit.degenerate {
            None
        } else {
            Some(Cholesky::factor_regularized(&model.joint_cov, ridge)?)
        };
        let mut round_best: Option<(usize, f64)> = None;
        for (m, u) in members.iter().enumerate() {
            let mut y_tilde = u.clone();
            y_tilde.extend_from_slice(high_obs.values());
            let score = match &chol {
                None => f64::INFINITY,
                Some(c) => {
                    let r: Vec<f64> = y_tilde
                        .iter()
                        .zip(&model.joint_mean)
                        .map(|(y, mu)| y - mu)
                        .collect();
                    crate::gp::gaussian_log_likelihood(c, &r)
                }
            };
            if better(score, round_best.map(|b| b.1)) {
                round_best = Some((m, score));
            }
        }
        let (member, score) = round_best.expect("ensemble has members");
        model.joint_log_likelihood = score;
        scores.push(RhoScore {
            rho,
            delta_log_likelihood: fit.log_likelihood,
            joint_log_likelihood: score,
        });
        if better(score, best.as_ref().map(|b| b.model.joint_log_likelihood)) {
            let mut y_tilde = members[member].clone();
            y_tilde.extend_from_slice(high_obs.values());
            *best = Some(CoPhikFit {
                model,
                member,
                y_tilde,
            });
        }
        Ok(())
    };
    for rho in rho_grid.coarse() {
        evaluate(rho, &mut best)?;
    }
    let center = best
        .as_ref()
        .map(|b| b.model.rho)
        .ok_or_else(|| crate::Error::InvalidArgument("rho grid is empty".into()))?;
    for rho in rho_grid.refined(center) {
        evaluate(rho, &mut best)?;
    }
    let mut out = best.expect("non-empty grid");
    out.model.scores = scores;
    Ok(out)
}
