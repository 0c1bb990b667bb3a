//! Ensembles of model realizations on a shared grid and the GP whose mean
//! and covariance are their sample statistics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::gp::{GpModel, PriorSource};
use crate::grid::Grid;
use crate::linalg::SymMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fidelity {
    High,
    Low,
    Bifidelity,
}

impl Fidelity {
    pub fn as_str(self) -> &'static str {
        match self {
            Fidelity::High => "high",
            Fidelity::Low => "low",
            Fidelity::Bifidelity => "bifidelity",
        }
    }
}

/// `M` realizations `u^m` on one grid with their parameter samples `z^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    grid: Grid,
    members: Vec<Vec<f64>>,
    params: Vec<Vec<f64>>,
    fidelity: Fidelity,
}

impl Ensemble {
    /// Validates shapes; a single member is allowed here (selection and
    /// lifting accept it) but statistics need two.
    pub fn new(
        grid: Grid,
        members: Vec<Vec<f64>>,
        params: Vec<Vec<f64>>,
        fidelity: Fidelity,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("ensemble has no members".into()));
        }
        if params.len() != members.len() {
            return Err(Error::DimensionMismatch {
                expected: members.len(),
                found: params.len(),
                context: "ensemble parameter samples",
            });
        }
        for (m, u) in members.iter().enumerate() {
            if u.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "member {m} has {} values for {} grid nodes",
                    u.len(),
                    grid.len()
                )));
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("ensemble member"));
            }
        }
        Ok(Self {
            grid,
            members,
            params,
            fidelity,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    pub fn member(&self, m: usize) -> &[f64] {
        &self.members[m]
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn fidelity(&self) -> Fidelity {
        self.fidelity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Sub-ensemble of the given members, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            grid: self.grid.clone(),
            members: indices.iter().map(|&i| self.members[i].clone()).collect(),
            params: indices.iter().map(|&i| self.params[i].clone()).collect(),
            fidelity: self.fidelity,
        }
    }

    pub fn with_fidelity(mut self, fidelity: Fidelity) -> Self {
        self.fidelity = fidelity;
        self
    }

    /// Member `m` at an arbitrary point, by multilinear interpolation.
    pub fn member_at(&self, m: usize, x: &[f64]) -> Result<f64> {
        self.grid
            .interpolate(&self.members[m], x)
            .ok_or_else(|| Error::GridMismatch(format!("point {x:?} lies outside the grid")))
    }

    pub fn statistics(&self) -> Result<EnsembleGp> {
        EnsembleGp::new(self)
    }
}

/// `GP(μ_MC, k_MC)` built from an ensemble: pointwise mean and unbiased
/// sample covariance (divisor `M − 1`).
#[derive(Clone, Debug)]
pub struct EnsembleGp {
    grid: Grid,
    mean: Vec<f64>,
    /// `(u^m − μ)/√(M−1)`, stored node-major: `scaled[node·M + m]`.
    scaled: Vec<f64>,
    members: usize,
    source: PriorSource,
}

impl EnsembleGp {
    pub fn new(e: &Ensemble) -> Result<Self> {
        let m = e.len();
        if m < 2 {
            return Err(Error::SingleMember);
        }
        let n = e.grid.len();
        let mut mean = vec![0.0; n];
        for u in &e.members {
            for (acc, v) in mean.iter_mut().zip(u) {
                *acc += v;
            }
        }
        for v in &mut mean {
            *v /= m as f64;
        }
        let s = 1.0 / libm::sqrt((m - 1) as f64);
        let mut scaled = vec![0.0; n * m];
        for (k, u) in e.members.iter().enumerate() {
            for i in 0..n {
                scaled[i * m + k] = (u[i] - mean[i]) * s;
            }
        }
        let source = match e.fidelity {
            Fidelity::Bifidelity => PriorSource::BifidelityEnsemble,
            _ => PriorSource::Ensemble,
        };
        Ok(Self {
            grid: e.grid.clone(),
            mean,
            scaled,
            members: m,
            source,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn members(&self) -> usize {
        self.members
    }

    /// `μ_MC` on the grid nodes.
    pub fn mean_field(&self) -> &[f64] {
        &self.mean
    }

    /// `σ²_MC` on the grid nodes.
    pub fn variance_field(&self) -> Vec<f64> {
        self.scaled
            .chunks_exact(self.members)
            .map(|a| a.iter().map(|v| v * v).sum())
            .collect()
    }

    /// Scaled anomaly vector `(u^m(x) − μ(x))/√(M−1)` over members.
    pub fn anomaly(&self, x: &[f64]) -> Vec<f64> {
        let m = self.members;
        match self.grid.stencil(x) {
            Some(s) => {
                let mut out = vec![0.0; m];
                for &(node, w) in &s.nodes {
                    for (o, a) in out.iter_mut().zip(&self.scaled[node * m..(node + 1) * m]) {
                        *o += w * a;
                    }
                }
                out
            }
            None => panic!("point {x:?} lies outside the ensemble grid"),
        }
    }

    pub(crate) fn node_anomaly(&self, node: usize) -> &[f64] {
        &self.scaled[node * self.members..(node + 1) * self.members]
    }

    /// Checks that every location can be evaluated.
    pub fn check_locations(&self, locations: &[Vec<f64>]) -> Result<()> {
        for x in locations {
            if self.grid.stencil(x).is_none() {
                return Err(Error::GridMismatch(format!("point {x:?} lies outside the grid")));
            }
        }
        Ok(())
    }

    /// `k_MC(·, x)` on every grid node.
    pub fn cov_field(&self, x: &[f64]) -> Vec<f64> {
        let a = self.anomaly(x);
        (0..self.grid.len())
            .map(|i| crate::linalg::dot(self.node_anomaly(i), &a))
            .collect()
    }
}

impl GpModel for EnsembleGp {
    fn mean(&self, x: &[f64]) -> f64 {
        self.grid
            .interpolate(&self.mean, x)
            .unwrap_or_else(|| panic!("point {x:?} lies outside the ensemble grid"))
    }

    fn cov(&self, x: &[f64], y: &[f64]) -> f64 {
        crate::linalg::dot(&self.anomaly(x), &self.anomaly(y))
    }

    fn source(&self) -> PriorSource {
        self.source
    }

    fn cov_matrix(&self, locations: &[Vec<f64>]) -> SymMatrix {
        let a: Vec<Vec<f64>> = locations.iter().map(|x| self.anomaly(x)).collect();
        SymMatrix::from_lower_fn(a.len(), |i, j| crate::linalg::dot(&a[i], &a[j]))
    }

    fn cross_cov(&self, x: &[f64], locations: &[Vec<f64>]) -> Vec<f64> {
        let ax = self.anomaly(x);
        locations
            .iter()
            .map(|p| crate::linalg::dot(&ax, &self.anomaly(p)))
            .collect()
    }

    /// `a(x)ᵀ (Σₙ a(x⁽ⁿ⁾) wₙ)`: a combination of member anomalies at `x`.
    fn cross_cov_dot(&self, x: &[f64], locations: &[Vec<f64>], w: &[f64]) -> f64 {
        let mut beta = vec![0.0; self.members];
        for (p, wn) in locations.iter().zip(w) {
            for (b, a) in beta.iter_mut().zip(self.anomaly(p)) {
                *b += a * wn;
            }
        }
        crate::linalg::dot(&self.anomaly(x), &beta)
    }
}
