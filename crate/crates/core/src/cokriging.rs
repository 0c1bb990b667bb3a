//! Two-level auto-regressive CoKriging, `Y_H = ρ Y_L + Y_d`.

use alloc::vec;
use alloc::vec::Vec;

use crate::gp::{
    fit_ordinary_kriging, gaussian_log_likelihood, GpModel, HyperSearchConfig, KrigingFit,
    Observations, Posterior, StationaryGp,
};
use crate::linalg::{dot, Cholesky, Matrix, SymMatrix};
use crate::{Error, Result};

/// `[[C_LL, ρ C_LH], [ρ C_HL, ρ² C_HH + C_d]]`
pub fn assemble_joint_cov(
    low_ll: &SymMatrix,
    low_lh: &Matrix,
    low_hh: &SymMatrix,
    delta_hh: &SymMatrix,
    rho: f64,
) -> Result<SymMatrix> {
    let nl = low_ll.dim();
    let nh = low_hh.dim();
    if low_lh.nrows() != nl || low_lh.ncols() != nh {
        return Err(Error::DimensionMismatch {
            expected: nl * nh,
            found: low_lh.nrows() * low_lh.ncols(),
            context: "low-fidelity cross block",
        });
    }
    if delta_hh.dim() != nh {
        return Err(Error::DimensionMismatch {
            expected: nh,
            found: delta_hh.dim(),
            context: "discrepancy block",
        });
    }
    Ok(SymMatrix::from_lower_fn(nl + nh, |i, j| {
        // i ≥ j
        match (i < nl, j < nl) {
            (true, true) => low_ll[(i, j)],
            (false, true) => rho * low_lh[(j, i - nl)],
            _ => rho * rho * low_hh[(i - nl, j - nl)] + delta_hh[(i - nl, j - nl)],
        }
    }))
}

/// Search grid for `ρ`: a coarse equispaced sweep, then one refinement
/// sweep centred on the coarse winner.
#[derive(Clone, Debug, PartialEq)]
pub struct RhoGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub refine_half_width: f64,
    pub refine_count: usize,
}

impl Default for RhoGrid {
    fn default() -> Self {
        Self {
            lo: -2.0,
            hi: 3.0,
            count: 41,
            refine_half_width: 0.125,
            refine_count: 11,
        }
    }
}

impl RhoGrid {
    pub fn fixed(rho: f64) -> Self {
        Self {
            lo: rho,
            hi: rho,
            count: 1,
            refine_half_width: 0.0,
            refine_count: 0,
        }
    }

    pub fn coarse(&self) -> Vec<f64> {
        sweep(self.lo, self.hi, self.count)
    }

    pub fn refined(&self, center: f64) -> Vec<f64> {
        if self.refine_count == 0 {
            return Vec::new();
        }
        sweep(
            center - self.refine_half_width,
            center + self.refine_half_width,
            self.refine_count,
        )
    }
}

fn sweep(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Scores recorded for one `ρ` candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct RhoScore {
    pub rho: f64,
    /// Profiled `ln L` of the `Y_d` fit (the two-step criterion).
    pub delta_log_likelihood: f64,
    /// Joint `ln L̃` of the stacked observations.
    pub joint_log_likelihood: f64,
}

/// A fitted CoKriging prior. The low-fidelity GP `L` is either a stationary
/// Kriging model or the ensemble GP (CoPhIK).
#[derive(Clone, Debug)]
pub struct CoKrigingModel<L> {
    pub rho: f64,
    pub low: L,
    pub delta: StationaryGp,
    /// `Y_d` data were constant; `C_d = 0`.
    pub delta_degenerate: bool,
    pub low_locations: Vec<Vec<f64>>,
    pub high_locations: Vec<Vec<f64>>,
    /// `C̃`
    pub joint_cov: SymMatrix,
    /// `μ̃ = (μ_L(X_L); μ_H(X_H))`
    pub joint_mean: Vec<f64>,
    pub delta_log_likelihood: f64,
    pub joint_log_likelihood: f64,
    pub scores: Vec<RhoScore>,
}

impl<L: GpModel> CoKrigingModel<L> {
    pub fn new(
        rho: f64,
        low: L,
        delta: StationaryGp,
        low_locations: Vec<Vec<f64>>,
        high_locations: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !rho.is_finite() {
            return Err(Error::NonFinite("rho"));
        }
        let c_ll = low.cov_matrix(&low_locations);
        let c_hh = low.cov_matrix(&high_locations);
        let c_lh = Matrix::from_fn(low_locations.len(), high_locations.len(), |i, j| {
            low.cov(&low_locations[i], &high_locations[j])
        });
        let c_d = delta.cov_matrix(&high_locations);
        let joint_cov = assemble_joint_cov(&c_ll, &c_lh, &c_hh, &c_d, rho)?;
        let mut joint_mean = low.mean_vector(&low_locations);
        joint_mean.extend(high_locations.iter().map(|x| rho * low.mean(x) + delta.mean));
        Ok(Self {
            rho,
            low,
            delta_degenerate: delta.kernel.variance == 0.0,
            delta,
            low_locations,
            high_locations,
            joint_cov,
            joint_mean,
            delta_log_likelihood: f64::NAN,
            joint_log_likelihood: f64::NAN,
            scores: Vec::new(),
        })
    }

    /// `μ_H(x) = ρ μ_L(x) + μ_d`
    pub fn high_mean(&self, x: &[f64]) -> f64 {
        self.rho * self.low.mean(x) + self.delta.mean
    }

    /// `k_H(x, x') = ρ² k_L(x, x') + k_d(x, x')`
    pub fn high_cov(&self, x: &[f64], y: &[f64]) -> f64 {
        self.rho * self.rho * self.low.cov(x, y) + self.delta.cov(x, y)
    }

    pub fn joint_size(&self) -> usize {
        self.low_locations.len() + self.high_locations.len()
    }

    fn check_joint(&self, y_tilde: &[f64]) -> Result<()> {
        if y_tilde.len() != self.joint_size() {
            return Err(Error::DimensionMismatch {
                expected: self.joint_size(),
                found: y_tilde.len(),
                context: "stacked observations",
            });
        }
        Ok(())
    }

    /// `ln L̃` of the stacked observations `ỹ = (y_L; y_H)`. Unbounded
    /// (`+∞`) when `C_d` vanishes, since the data then lie on a degenerate
    /// subspace of the prior.
    pub fn joint_log_likelihood(&self, y_tilde: &[f64], ridge: f64) -> Result<f64> {
        self.check_joint(y_tilde)?;
        if self.delta_degenerate {
            return Ok(f64::INFINITY);
        }
        let chol = Cholesky::factor_regularized(&self.joint_cov, ridge)?;
        Ok(joint_score(&chol, y_tilde, &self.joint_mean))
    }

    /// Conditions on `ỹ`, factoring `C̃` once.
    pub fn condition(&self, y_tilde: &[f64], ridge: f64) -> Result<CoKrigingConditioned<'_, L>> {
        self.check_joint(y_tilde)?;
        let chol = Cholesky::factor_regularized(&self.joint_cov, ridge)?;
        let r: Vec<f64> = y_tilde
            .iter()
            .zip(&self.joint_mean)
            .map(|(y, m)| y - m)
            .collect();
        let weights = chol.solve(&r);
        Ok(CoKrigingConditioned {
            model: self,
            chol,
            weights,
        })
    }
}

fn joint_score(chol: &Cholesky, y_tilde: &[f64], mean: &[f64]) -> f64 {
    let r: Vec<f64> = y_tilde.iter().zip(mean).map(|(y, m)| y - m).collect();
    gaussian_log_likelihood(chol, &r)
}

/// CoKriging prior conditioned on stacked observations.
pub struct CoKrigingConditioned<'a, L> {
    model: &'a CoKrigingModel<L>,
    chol: Cholesky,
    weights: Vec<f64>,
}

impl<L: GpModel> CoKrigingConditioned<'_, L> {
    pub fn ridge(&self) -> f64 {
        self.chol.ridge()
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// `C̃⁻¹ (ỹ − μ̃)`
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `c̃(x) = (ρ c_L(x); c_H(x))`
    pub fn cross_cov(&self, x: &[f64]) -> Vec<f64> {
        let m = self.model;
        let mut c: Vec<f64> = m
            .low_locations
            .iter()
            .map(|p| m.rho * m.low.cov(x, p))
            .collect();
        c.extend(m.high_locations.iter().map(|p| m.high_cov(x, p)));
        c
    }

    /// Mean and unclamped MSE; the MSE omits the small correction term for
    /// the estimated `μ`, as is customary.
    pub fn predict_one(&self, x: &[f64]) -> (f64, f64) {
        let m = self.model;
        let c = self.cross_cov(x);
        let mean = m.high_mean(x) + dot(&c, &self.weights);
        let prior = m.rho * m.rho * m.low.variance(x) + m.delta.kernel.variance;
        (mean, prior - self.chol.quad_form(&c))
    }

    pub fn predict(&self, query: &[Vec<f64>]) -> Posterior {
        let (mean, mse) = query
            .iter()
            .map(|x| {
                let (a, b) = self.predict_one(x);
                (a, b.max(0.0))
            })
            .unzip();
        Posterior {
            mean,
            mse,
            ridge: self.chol.ridge(),
        }
    }
}

pub fn cokriging_posterior<L: GpModel>(
    model: &CoKrigingModel<L>,
    y_tilde: &[f64],
    query: &[Vec<f64>],
    ridge: f64,
) -> Result<Posterior> {
    Ok(model.condition(y_tilde, ridge)?.predict(query))
}

/// Values of `low_obs` at each high-fidelity location.
fn restrict_low(low_obs: &Observations, high_obs: &Observations) -> Result<Vec<f64>> {
    high_obs
        .locations()
        .iter()
        .enumerate()
        .map(|(index, x)| {
            low_obs
                .locations()
                .iter()
                .position(|p| p == x)
                .map(|i| low_obs.values()[i])
                .ok_or(Error::MissingCommonPoints { index })
        })
        .collect()
}

fn fit_delta(
    high_obs: &Observations,
    y_d: Vec<f64>,
    search: &HyperSearchConfig,
) -> Result<KrigingFit> {
    fit_ordinary_kriging(&high_obs.with_values(y_d)?, search)
}

pub(crate) fn better(score: f64, best: Option<f64>) -> bool {
    match best {
        None => true,
        Some(b) => score > b || (b.is_nan() && !score.is_nan()),
    }
}

/// Two-step CoKriging with a low-fidelity GP supplied by the caller:
/// for every `ρ` on the grid, `Y_d` is fitted to `y_H − ρ y_L(X_H)` and the
/// pair is scored by `ln L̃`; the best pair wins (ties keep the earlier `ρ`).
pub fn fit_cokriging_with_low<L: GpModel + Clone>(
    low: L,
    low_obs: &Observations,
    high_obs: &Observations,
    search: &HyperSearchConfig,
    rho_grid: &RhoGrid,
    ridge: f64,
) -> Result<(CoKrigingModel<L>, Vec<f64>)> {
    let y_l_at_h = restrict_low(low_obs, high_obs)?;
    let mut y_tilde = low_obs.values().to_vec();
    y_tilde.extend_from_slice(high_obs.values());

    let mut best: Option<CoKrigingModel<L>> = None;
    let mut scores = Vec::new();
    let mut evaluate = |rho: f64, best: &mut Option<CoKrigingModel<L>>| -> Result<()> {
        let y_d: Vec<f64> = high_obs
            .values()
            .iter()
            .zip(&y_l_at_h)
            .map(|(h, l)| h - rho * l)
            .collect();
        let fit = fit_delta(high_obs, y_d, search)?;
        let mut model = CoKrigingModel::new(
            rho,
            low.clone(),
            fit.model,
            low_obs.locations().to_vec(),
            high_obs.locations().to_vec(),
        )?;
        model.delta_degenerate = fit.degenerate;
        model.delta_log_likelihood = fit.log_likelihood;
        model.joint_log_likelihood = model.joint_log_likelihood(&y_tilde, ridge)?;
        scores.push(RhoScore {
            rho,
            delta_log_likelihood: fit.log_likelihood,
            joint_log_likelihood: model.joint_log_likelihood,
        });
        if better(model.joint_log_likelihood, best.as_ref().map(|b| b.joint_log_likelihood)) {
            *best = Some(model);
        }
        Ok(())
    };
    for rho in rho_grid.coarse() {
        evaluate(rho, &mut best)?;
    }
    let center = best.as_ref().map(|b| b.rho).ok_or_else(|| {
        Error::InvalidArgument("rho grid is empty".into())
    })?;
    for rho in rho_grid.refined(center) {
        evaluate(rho, &mut best)?;
    }
    let mut model = best.expect("non-empty grid");
    model.scores = scores;
    Ok((model, y_tilde))
}

/// Classical two-level CoKriging: `Y_L` by ordinary Kriging on the
/// low-fidelity data, then the `ρ`/`Y_d` search. Returns the model and the
/// stacked observation vector `ỹ`.
pub fn fit_cokriging(
    low_obs: &Observations,
    high_obs: &Observations,
    search: &HyperSearchConfig,
) -> Result<(CoKrigingModel<StationaryGp>, Vec<f64>)> {
    restrict_low(low_obs, high_obs)?;
    let low = fit_ordinary_kriging(low_obs, search)?;
    fit_cokriging_with_low(low.model, low_obs, high_obs, search, &RhoGrid::default(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::GaussianKernel;

    #[test]
    fn scalar_block() {
        let c = assemble_joint_cov(
            &SymMatrix::identity(1),
            &Matrix::identity(1),
            &SymMatrix::identity(1),
            &SymMatrix::from_diagonal(&[0.5]),
            2.0,
        )
        .unwrap();
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(c[(0, 1)], 2.0);
        assert_eq!(c[(1, 0)], 2.0);
        assert_eq!(c[(1, 1)], 4.5);
    }

    #[test]
    fn zero_rho_is_block_diagonal() {
        let cl = SymMatrix::from_lower_fn(2, |i, j| if i == j { 2.0 } else { 0.3 });
        let cd = SymMatrix::from_lower_fn(2, |i, j| if i == j { 1.0 } else { -0.2 });
        let c = assemble_joint_cov(&cl, cl.as_matrix(), &cl, &cd, 0.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(c[(i, j + 2)], 0.0);
                assert_eq!(c[(i + 2, j + 2)], cd[(i, j)]);
            }
        }
    }

    #[test]
    fn dimension_check() {
        let r = assemble_joint_cov(
            &SymMatrix::identity(2),
            &Matrix::identity(1),
            &SymMatrix::identity(1),
            &SymMatrix::identity(1),
            1.0,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    fn line_obs(f: impl Fn(f64) -> f64) -> Observations {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        Observations::new(xs.iter().map(|&x| vec![x]).collect(), xs.iter().map(|&x| f(x)).collect())
            .unwrap()
    }

    #[test]
    fn affine_relation_is_recovered() {
        let low = line_obs(|x| libm::sin(5.0 * x) + 2.0 * x);
        let high = line_obs(|x| 2.0 * (libm::sin(5.0 * x) + 2.0 * x) + 3.0);
        let (m, _) = fit_cokriging(&low, &high, &HyperSearchConfig::default()).unwrap();
        assert!((m.rho - 2.0).abs() < 1e-12);
        assert!((m.delta.mean - 3.0).abs() < 1e-9);
        assert!(m.delta_degenerate);
    }

    #[test]
    fn identical_fidelities_give_unit_rho() {
        let low = line_obs(|x| libm::cos(3.0 * x));
        let (m, _) = fit_cokriging(&low, &low, &HyperSearchConfig::default()).unwrap();
        assert!((m.rho - 1.0).abs() < 1e-12);
        assert!(m.delta_degenerate);
    }

    #[test]
    fn missing_common_points() {
        let low = line_obs(|x| x);
        let high = Observations::new(vec![vec![0.5]], vec![1.0]).unwrap();
        assert_eq!(
            fit_cokriging(&low, &high, &HyperSearchConfig::default()).unwrap_err(),
            Error::MissingCommonPoints { index: 0 }
        );
    }

    #[test]
    fn empty_low_data_with_zero_rho_is_kriging_of_delta() {
        let delta = StationaryGp {
            mean: 0.7,
            kernel: GaussianKernel::new(1.3, vec![0.4]).unwrap(),
        };
        let low = StationaryGp {
            mean: -1.0,
            kernel: GaussianKernel::new(2.0, vec![0.9]).unwrap(),
        };
        let high = Observations::new(vec![vec![0.1], vec![0.5], vec![0.8]], vec![1.0, -0.5, 2.0]).unwrap();
        let m = CoKrigingModel::new(0.0, low, delta.clone(), Vec::new(), high.locations().to_vec()).unwrap();
        let q: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 6.0]).collect();
        let a = cokriging_posterior(&m, high.values(), &q, 0.0).unwrap();
        let b = crate::gp::posterior(&delta, &high, &q, 0.0).unwrap();
        for i in 0..q.len() {
            assert!((a.mean[i] - b.mean[i]).abs() < 1e-12);
            assert!((a.mse[i] - b.mse[i]).abs() < 1e-12);
        }
    }
}
