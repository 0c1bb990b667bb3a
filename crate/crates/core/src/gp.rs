//! Gaussian-process regression: kernels, priors, likelihood, posterior and
//! ordinary Kriging with maximum-likelihood hyperparameters.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::{dot, Cholesky, SymMatrix};
use crate::optim::{latin_hypercube, nelder_mead};
use crate::{Error, Result};

/// Noiseless observations `y` at distinct locations `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    locations: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Observations {
    pub fn new(locations: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if locations.len() != values.len() {
            return Err(Error::InvalidObservations(format!(
                "{} locations but {} values",
                locations.len(),
                values.len()
            )));
        }
        let dim = locations.first().map_or(0, Vec::len);
        for (i, x) in locations.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::InvalidObservations(format!(
                    "location {i} has dimension {} (expected {dim})",
                    x.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) || !values[i].is_finite() {
                return Err(Error::InvalidObservations(format!("observation {i} is not finite")));
            }
            if locations[..i].iter().any(|p| p == x) {
                return Err(Error::InvalidObservations(format!("location {i} is duplicated")));
            }
        }
        Ok(Self { locations, values })
    }

    pub fn empty() -> Self {
        Self {
            locations: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn locations(&self) -> &[Vec<f64>] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.locations.first().map_or(0, Vec::len)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.locations.iter().any(|p| p.as_slice() == x)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if self.contains(&x) {
            return Err(Error::InvalidObservations("duplicate location".into()));
        }
        if !self.is_empty() && x.len() != self.dim() {
            return Err(Error::InvalidObservations("dimension mismatch".into()));
        }
        self.locations.push(x);
        self.values.push(y);
        Ok(())
    }

    /// Same locations with replaced values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.locations.clone(), values)
    }
}

/// Squared-exponential kernel `σ² exp(-½ Σ ((x_i - x'_i)/l_i)²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    pub variance: f64,
    pub lengthscales: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(variance: f64, lengthscales: Vec<f64>) -> Result<Self> {
        if !(variance >= 0.0) || lengthscales.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidArgument(
                "kernel needs non-negative variance and positive lengthscales".into(),
            ));
        }
        Ok(Self {
            variance,
            lengthscales,
        })
    }

    pub fn correlation(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let t = (a - b) / l;
                t * t
            })
            .sum();
        libm::exp(-0.5 * r2)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.variance * self.correlation(x, y)
    }
}

/// Where a prior's mean and covariance come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorSource {
    Stationary,
    Ensemble,
    BifidelityEnsemble,
}

/// A finite-dimensional view of a Gaussian process prior `GP(μ, k)`.
pub trait GpModel {
    fn mean(&self, x: &[f64]) -> f64;

    fn cov(&self, x: &[f64], y: &[f64]) -> f64;

    fn source(&self) -> PriorSource;

    fn variance(&self, x: &[f64]) -> f64 {
        self.cov(x, x)
    }

    fn mean_vector(&self, locations: &[Vec<f64>]) -> Vec<f64> {
        locations.iter().map(|x| self.mean(x)).collect()
    }

    fn cov_matrix(&self, locations: &[Vec<f64>]) -> SymMatrix {
        SymMatrix::from_lower_fn(locations.len(), |i, j| self.cov(&locations[i], &locations[j]))
    }

    /// `(k(x, x⁽¹⁾), …, k(x, x⁽ᴺ⁾))`
    fn cross_cov(&self, x: &[f64], locations: &[Vec<f64>]) -> Vec<f64> {
        locations.iter().map(|p| self.cov(x, p)).collect()
    }

    /// `Σₙ k(x, x⁽ⁿ⁾) wₙ`. Low-rank models override this so the result stays
    /// in the span of their factors however large `w` is.
    fn cross_cov_dot(&self, x: &[f64], locations: &[Vec<f64>], w: &[f64]) -> f64 {
        dot(&self.cross_cov(x, locations), w)
    }
}

impl<T: GpModel + ?Sized> GpModel for &T {
    fn mean(&self, x: &[f64]) -> f64 {
        (**self).mean(x)
    }
    fn cov(&self, x: &[f64], y: &[f64]) -> f64 {
        (**self).cov(x, y)
    }
    fn source(&self) -> PriorSource {
        (**self).source()
    }
    fn variance(&self, x: &[f64]) -> f64 {
        (**self).variance(x)
    }
    fn mean_vector(&self, locations: &[Vec<f64>]) -> Vec<f64> {
        (**self).mean_vector(locations)
    }
    fn cov_matrix(&self, locations: &[Vec<f64>]) -> SymMatrix {
        (**self).cov_matrix(locations)
    }
    fn cross_cov(&self, x: &[f64], locations: &[Vec<f64>]) -> Vec<f64> {
        (**self).cross_cov(x, locations)
    }
    fn cross_cov_dot(&self, x: &[f64], locations: &[Vec<f64>], w: &[f64]) -> f64 {
        (**self).cross_cov_dot(x, locations, w)
    }
}

/// Constant-mean GP with a Gaussian kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryGp {
    pub mean: f64,
    pub kernel: GaussianKernel,
}

impl GpModel for StationaryGp {
    fn mean(&self, _x: &[f64]) -> f64 {
        self.mean
    }

    fn cov(&self, x: &[f64], y: &[f64]) -> f64 {
        self.kernel.eval(x, y)
    }

    fn source(&self) -> PriorSource {
        PriorSource::Stationary
    }

    fn variance(&self, _x: &[f64]) -> f64 {
        self.kernel.variance
    }
}

/// `-½ rᵀ C⁻¹ r - ½ ln|C| - (N/2) ln 2π` for a factored `C`.
pub fn gaussian_log_likelihood(chol: &Cholesky, residual: &[f64]) -> f64 {
    let n = residual.len() as f64;
    -0.5 * chol.quad_form(residual) - 0.5 * chol.log_det() - 0.5 * n * libm::log(2.0 * PI)
}

/// Log marginal likelihood of `obs` under `model`, with `C + ridge·I`.
pub fn log_marginal_likelihood<M: GpModel + ?Sized>(
    model: &M,
    obs: &Observations,
    ridge: f64,
) -> Result<f64> {
    let c = model.cov_matrix(obs.locations());
    let chol = Cholesky::factor(&c, ridge)?;
    let mu = model.mean_vector(obs.locations());
    let r: Vec<f64> = obs.values().iter().zip(&mu).map(|(y, m)| y - m).collect();
    Ok(gaussian_log_likelihood(&chol, &r))
}

/// Prior conditioned on noiseless observations; one factorization of `C`
/// serves every query.
#[derive(Clone, Debug)]
pub struct Conditioned<M> {
    model: M,
    locations: Vec<Vec<f64>>,
    chol: Cholesky,
    weights: Vec<f64>,
}

impl<M: GpModel> Conditioned<M> {
    /// Factors `C + ridge·I`, escalating the ridge if the factorization fails.
    pub fn new(model: M, obs: &Observations, ridge: f64) -> Result<Self> {
        let c = model.cov_matrix(obs.locations());
        let chol = Cholesky::factor_regularized(&c, ridge)?;
        let mu = model.mean_vector(obs.locations());
        let r: Vec<f64> = obs.values().iter().zip(&mu).map(|(y, m)| y - m).collect();
        let weights = chol.solve(&r);
        Ok(Self {
            model,
            locations: obs.locations().to_vec(),
            chol,
            weights,
        })
    }

    /// Conditions with a factorization of `C` computed by the caller.
    pub fn with_cholesky(model: M, obs: &Observations, chol: Cholesky) -> Result<Self> {
        if chol.dim() != obs.len() {
            return Err(Error::DimensionMismatch {
                expected: obs.len(),
                found: chol.dim(),
                context: "covariance factor",
            });
        }
        let mu = model.mean_vector(obs.locations());
        let r: Vec<f64> = obs.values().iter().zip(&mu).map(|(y, m)| y - m).collect();
        let weights = chol.solve(&r);
        Ok(Self {
            model,
            locations: obs.locations().to_vec(),
            chol,
            weights,
        })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// `C⁻¹ (y − μ)`
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ridge(&self) -> f64 {
        self.chol.ridge()
    }

    pub fn mean_at(&self, x: &[f64]) -> f64 {
        self.model.mean(x) + self.model.cross_cov_dot(x, &self.locations, &self.weights)
    }

    /// Unclamped `σ²(x) − cᵀ C⁻¹ c`.
    pub fn mse_at(&self, x: &[f64]) -> f64 {
        let c = self.model.cross_cov(x, &self.locations);
        self.model.variance(x) - self.chol.quad_form(&c)
    }

    /// Mean and unclamped MSE at `x` sharing one covariance evaluation.
    pub fn predict_one(&self, x: &[f64]) -> (f64, f64) {
        let c = self.model.cross_cov(x, &self.locations);
        (
            self.mean_at(x),
            self.model.variance(x) - self.chol.quad_form(&c),
        )
    }

    pub fn predict(&self, query: &[Vec<f64>]) -> Posterior {
        let mut mean = Vec::with_capacity(query.len());
        let mut mse = Vec::with_capacity(query.len());
        for x in query {
            let (m, s) = self.predict_one(x);
            mean.push(m);
            mse.push(s.max(0.0));
        }
        Posterior {
            mean,
            mse,
            ridge: self.chol.ridge(),
        }
    }
}

/// Posterior mean `ŷ` and MSE `ŝ²` (clamped at zero) on a set of query points.
#[derive(Clone, Debug, PartialEq)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub mse: Vec<f64>,
    /// Diagonal regularization used by the solve.
    pub ridge: f64,
}

impl Posterior {
    pub fn std_dev(&self) -> Vec<f64> {
        self.mse.iter().map(|v| libm::sqrt(*v)).collect()
    }
}

/// Posterior of `model` given `obs`, evaluated at `query`.
pub fn posterior<M: GpModel>(
    model: M,
    obs: &Observations,
    query: &[Vec<f64>],
    ridge: f64,
) -> Result<Posterior> {
    Ok(Conditioned::new(model, obs, ridge)?.predict(query))
}

/// Settings for the multi-start likelihood maximization.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperSearchConfig {
    pub restarts: usize,
    /// Lengthscale start range as fractions of the domain diameter.
    pub start_range: (f64, f64),
    /// Hard lengthscale bounds as fractions of the domain diameter.
    pub clamp_range: (f64, f64),
    pub max_evals: usize,
    pub tol: f64,
    pub seed: u64,
    /// Domain box; defaults to the bounding box of the observations.
    pub domain: Option<Vec<(f64, f64)>>,
}

impl Default for HyperSearchConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            start_range: (0.05, 2.0),
            clamp_range: (0.01, 10.0),
            max_evals: 300,
            tol: 1e-9,
            seed: 0,
            domain: None,
        }
    }
}

/// Ordinary Kriging fit: profiled `μ̂`, `σ̂²` and ML lengthscales.
#[derive(Clone, Debug, PartialEq)]
pub struct KrigingFit {
    pub model: StationaryGp,
    pub log_likelihood: f64,
    /// `σ̂² = 0`: the data are constant and the model is the constant `μ̂`.
    pub degenerate: bool,
}

/// Profiled estimators for fixed lengthscales.
#[derive(Clone, Debug, PartialEq)]
pub struct Profiled {
    pub mean: f64,
    pub variance: f64,
    pub log_likelihood: f64,
}

/// `μ̂ = 1ᵀΨ⁻¹y / 1ᵀΨ⁻¹1`, `σ̂² = (y−1μ̂)ᵀΨ⁻¹(y−1μ̂)/N` and the resulting
/// `ln L` with `C = σ̂²Ψ`.
pub fn profile_estimators(obs: &Observations, lengthscales: &[f64]) -> Result<Profiled> {
    let kernel = GaussianKernel::new(1.0, lengthscales.to_vec())?;
    let locs = obs.locations();
    let psi = SymMatrix::from_lower_fn(locs.len(), |i, j| kernel.correlation(&locs[i], &locs[j]));
    let chol = Cholesky::factor_regularized(&psi, 0.0)?;
    let n = obs.len();
    let ones = alloc::vec![1.0; n];
    let psi_inv_one = chol.solve(&ones);
    let mean = dot(&psi_inv_one, obs.values()) / dot(&psi_inv_one, &ones);
    let r: Vec<f64> = obs.values().iter().map(|y| y - mean).collect();
    let variance = (chol.quad_form(&r) / n as f64).max(0.0);
    let log_likelihood = if variance > 0.0 {
        -0.5 * n as f64 * (libm::log(2.0 * PI * variance) + 1.0) - 0.5 * chol.log_det()
    } else {
        f64::INFINITY
    };
    Ok(Profiled {
        mean,
        variance,
        log_likelihood,
    })
}

fn domain_box(obs: &Observations, search: &HyperSearchConfig) -> Vec<(f64, f64)> {
    if let Some(d) = &search.domain {
        return d.clone();
    }
    (0..obs.dim())
        .map(|k| {
            let (lo, hi) = obs
                .locations()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[k]), hi.max(p[k]))
                });
            (lo, hi)
        })
        .collect()
}

/// Ordinary (constant-mean) Kriging with anisotropic Gaussian kernel;
/// lengthscales maximize the profiled log marginal likelihood.
pub fn fit_ordinary_kriging(obs: &Observations, search: &HyperSearchConfig) -> Result<KrigingFit> {
    if obs.is_empty() {
        return Err(Error::InvalidObservations("no observations".into()));
    }
    let d = obs.dim();
    let diam = {
        let b = domain_box(obs, search);
        let s: f64 = b.iter().map(|(lo, hi)| (hi - lo) * (hi - lo)).sum();
        let diam = libm::sqrt(s);
        if diam > 0.0 {
            diam
        } else {
            1.0
        }
    };
    let y0 = obs.values()[0];
    let spread = obs.values().iter().fold(0.0f64, |m, y| m.max((y - y0).abs()));
    let scale = obs.values().iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if obs.len() < 2 || spread <= 1e-12 * scale {
        let mean = obs.values().iter().sum::<f64>() / obs.len() as f64;
        return Ok(KrigingFit {
            model: StationaryGp {
                mean,
                kernel: GaussianKernel::new(0.0, alloc::vec![diam; d])?,
            },
            log_likelihood: f64::INFINITY,
            degenerate: true,
        });
    }

    let start_box: Vec<(f64, f64)> = (0..d)
        .map(|_| {
            (
                libm::log(search.start_range.0 * diam),
                libm::log(search.start_range.1 * diam),
            )
        })
        .collect();
    let clamp_box: Vec<(f64, f64)> = (0..d)
        .map(|_| {
            (
                libm::log(search.clamp_range.0 * diam),
                libm::log(search.clamp_range.1 * diam),
            )
        })
        .collect();
    let objective = |logl: &[f64]| -> f64 {
        let l: Vec<f64> = logl.iter().map(|v| libm::exp(*v)).collect();
        match profile_estimators(obs, &l) {
            Ok(p) if p.log_likelihood.is_finite() => -p.log_likelihood,
            _ => f64::INFINITY,
        }
    };
    let step = 0.25 * (start_box[0].1 - start_box[0].0);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in latin_hypercube(&start_box, search.restarts.max(1), search.seed) {
        let m = nelder_mead(objective, &start, step, &clamp_box, search.max_evals, search.tol);
        match &best {
            Some((_, v)) if m.value >= *v => {}
            _ => best = Some((m.x, m.value)),
        }
    }
    let (logl, value) = best.expect("at least one restart");
    if !value.is_finite() {
        return Err(Error::NotPositiveDefinite {
            context: "kriging correlation matrix",
        });
    }
    let lengthscales: Vec<f64> = logl.iter().map(|v| libm::exp(*v)).collect();
    let p = profile_estimators(obs, &lengthscales)?;
    Ok(KrigingFit {
        model: StationaryGp {
            mean: p.mean,
            kernel: GaussianKernel::new(p.variance, lengthscales)?,
        },
        log_likelihood: p.log_likelihood,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obs1(x: f64, y: f64) -> Observations {
        Observations::new(vec![vec![x]], vec![y]).unwrap()
    }

    #[test]
    fn lml_closed_forms() {
        let m = StationaryGp {
            mean: 0.0,
            kernel: GaussianKernel::new(1.0, vec![1.0]).unwrap(),
        };
        let v = log_marginal_likelihood(&m, &obs1(0.0, 0.0), 0.0).unwrap();
        assert!((v + 0.5 * libm::log(2.0 * PI)).abs() < 1e-12);
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-12);

        // Far-apart points give C = I₂; y = μ kills the quadratic term.
        let far = Observations::new(vec![vec![0.0], vec![1e3]], vec![0.0, 0.0]).unwrap();
        let v = log_marginal_likelihood(&m, &far, 0.0).unwrap();
        assert!((v + libm::log(2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn lml_quadratic_scaling() {
        let m = StationaryGp {
            mean: 0.0,
            kernel: GaussianKernel::new(1.0, vec![0.7]).unwrap(),
        };
        let o = Observations::new(vec![vec![0.0], vec![0.5]], vec![0.3, -0.8]).unwrap();
        let o2 = o.with_values(vec![0.6, -1.6]).unwrap();
        let base = log_marginal_likelihood(&m, &o.with_values(vec![0.0, 0.0]).unwrap(), 0.0).unwrap();
        let q1 = base - log_marginal_likelihood(&m, &o, 0.0).unwrap();
        let q2 = base - log_marginal_likelihood(&m, &o2, 0.0).unwrap();
        // The quadratic term grows 4×, i.e. ln L drops by 3× the original term more.
        assert!((q2 - q1 - 3.0 * q1).abs() < 1e-12);
    }

    #[test]
    fn scalar_posterior() {
        let m = StationaryGp {
            mean: 0.0,
            kernel: GaussianKernel::new(1.0, vec![1.0]).unwrap(),
        };
        let p = posterior(&m, &obs1(0.0, 1.0), &[vec![1.0], vec![0.0], vec![1e4]], 0.0).unwrap();
        assert!((p.mean[0] - libm::exp(-0.5)).abs() < 1e-14);
        assert!((p.mse[0] - (1.0 - libm::exp(-1.0))).abs() < 1e-14);
        assert!((p.mean[1] - 1.0).abs() < 1e-14 && p.mse[1].abs() < 1e-14);
        assert!(p.mean[2].abs() < 1e-14 && (p.mse[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_data_is_degenerate() {
        let o = Observations::new(vec![vec![0.0], vec![0.3], vec![0.9]], vec![2.5; 3]).unwrap();
        let fit = fit_ordinary_kriging(&o, &HyperSearchConfig::default()).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.model.mean, 2.5);
        let p = posterior(&fit.model, &o, &[vec![0.5], vec![3.0]], 0.0).unwrap();
        assert!(p.mean.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn two_point_mean_estimator_is_midpoint() {
        for l in [0.1, 0.5, 2.0] {
            let o = Observations::new(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
            let p = profile_estimators(&o, &[l]).unwrap();
            assert!((p.mean - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn observations_validation() {
        assert!(Observations::new(vec![vec![0.0], vec![0.0]], vec![1.0, 2.0]).is_err());
        assert!(Observations::new(vec![vec![0.0]], vec![1.0, 2.0]).is_err());
        assert!(Observations::new(vec![vec![f64::NAN]], vec![1.0]).is_err());
    }

    #[test]
    fn kriging_interpolates() {
        let xs: Vec<f64> = (0..7).map(|i| i as f64 / 6.0).collect();
        let o = Observations::new(
            xs.iter().map(|&x| vec![x]).collect(),
            xs.iter().map(|&x| libm::sin(6.0 * x) + x).collect(),
        )
        .unwrap();
        let fit = fit_ordinary_kriging(&o, &HyperSearchConfig::default()).unwrap();
        assert!(!fit.degenerate);
        let p = posterior(&fit.model, &o, o.locations(), 0.0).unwrap();
        for (m, y) in p.mean.iter().zip(o.values()) {
            assert!((m - y).abs() <= 1e-6 * 2.0);
        }
        for s in &p.mse {
            assert!(*s <= 1e-8 * fit.model.kernel.variance);
        }
    }
}
