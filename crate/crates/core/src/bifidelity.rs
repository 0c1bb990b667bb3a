//! Bifidelity ensembles: greedy snapshot selection on low-fidelity runs and
//! lifting of every low-fidelity member onto the selected high-fidelity runs.

use alloc::format;
use alloc::vec::Vec;

use crate::ensemble::{Ensemble, Fidelity};
use crate::grid::Grid;
use crate::linalg::{pivoted_cholesky, Cholesky, PivotedCholesky, SymMatrix};
use crate::{Error, Result};

/// Relative pivot threshold for snapshot selection.
pub const DEFAULT_THRESHOLD: f64 = 1e-12;

/// Condition number above which the selected Gramian is regularized.
pub const ILL_CONDITIONED: f64 = 1e14;

/// Discrete inner product `⟨u, v⟩ = Σ wᵢ uᵢ vᵢ` over grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerProduct {
    weights: Option<Vec<f64>>,
}

impl InnerProduct {
    /// Unit weights: the Euclidean inner product of nodal values.
    pub fn euclidean() -> Self {
        Self { weights: None }
    }

    pub fn weighted(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("inner product weights must be positive".into()));
        }
        Ok(Self {
            weights: Some(weights),
        })
    }

    /// Uniform weights `|D| / n` on every node, so that a constant field of
    /// ones has squared norm equal to the domain measure.
    pub fn cell_measure(grid: &Grid) -> Self {
        let h: f64 = grid
            .axes()
            .iter()
            .map(|a| if a.len > 1 { (a.end() - a.start) / a.len as f64 } else { 1.0 })
            .product();
        Self {
            weights: Some(alloc::vec![h; grid.len()]),
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        match &self.weights {
            None => crate::linalg::dot(u, v),
            Some(w) => u.iter().zip(v).zip(w).map(|((a, b), w)| w * a * b).sum(),
        }
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        libm::sqrt(self.inner(u, u).max(0.0))
    }

    fn check(&self, n: usize) -> Result<()> {
        match &self.weights {
            Some(w) if w.len() != n => Err(Error::DimensionMismatch {
                expected: n,
                found: w.len(),
                context: "inner product weights",
            }),
            _ => Ok(()),
        }
    }
}

/// `W_ij = ⟨u_L^i, u_L^j⟩`
pub fn gramian(low: &Ensemble, ip: &InnerProduct) -> Result<SymMatrix> {
    ip.check(low.grid().len())?;
    let u = low.members();
    Ok(SymMatrix::from_lower_fn(u.len(), |i, j| ip.inner(&u[i], &u[j])))
}

/// Snapshot subset `γ` chosen by pivoted Cholesky of the Gramian.
#[derive(Clone, Debug)]
pub struct BifidelitySelection {
    gamma: Vec<usize>,
    chol: PivotedCholesky,
    gram: SymMatrix,
    gram_gamma: SymMatrix,
    requested: usize,
}

impl BifidelitySelection {
    /// `(i₁, …, i_{M_H})` in selection order.
    pub fn gamma_indices(&self) -> &[usize] {
        &self.gamma
    }

    pub fn pivoted_cholesky(&self) -> &PivotedCholesky {
        &self.chol
    }

    /// Full low-fidelity Gramian `W`.
    pub fn gramian(&self) -> &SymMatrix {
        &self.gram
    }

    /// `⟨u_L^{i_j}, u_L^{i_k}⟩` over `γ`.
    pub fn gram_gamma(&self) -> &SymMatrix {
        &self.gram_gamma
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    /// The residual diagonal fell below the threshold before `M_H` pivots.
    pub fn rank_exhausted(&self) -> bool {
        self.gamma.len() < self.requested
    }
}

/// Picks the first `m_h` pivots of the pivoted Cholesky factorization of the
/// Gramian, i.e. repeatedly the member furthest from the span of those
/// already chosen. Stops early (flagged) if the span is exhausted.
pub fn select_subset(
    low: &Ensemble,
    ip: &InnerProduct,
    m_h: usize,
    threshold: f64,
) -> Result<BifidelitySelection> {
    if m_h == 0 || m_h > low.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {m_h} of {} members",
            low.len()
        )));
    }
    let gram = gramian(low, ip)?;
    let chol = pivoted_cholesky(&gram, threshold)?;
    let gamma: Vec<usize> = chol.selected().iter().copied().take(m_h).collect();
    let gram_gamma = gram.submatrix(&gamma);
    Ok(BifidelitySelection {
        gamma,
        chol,
        gram,
        gram_gamma,
        requested: m_h,
    })
}

/// Lifting operator `𝓘(γ, v) = Σ c_j u_H^{i_j}` where `Σ c_j u_L^{i_j}` is
/// the projection of `v` on the span of the selected low-fidelity snapshots.
#[derive(Clone, Debug)]
pub struct Lifter<'a> {
    selection: &'a BifidelitySelection,
    low: &'a Ensemble,
    high_gamma: &'a Ensemble,
    ip: InnerProduct,
    solver: Cholesky,
    ill_conditioned: bool,
}

impl<'a> Lifter<'a> {
    /// `high_gamma` holds the high-fidelity runs for `γ`, in selection order.
    pub fn new(
        selection: &'a BifidelitySelection,
        low: &'a Ensemble,
        high_gamma: &'a Ensemble,
        ip: &InnerProduct,
    ) -> Result<Self> {
        let k = selection.gamma.len();
        if high_gamma.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: high_gamma.len(),
                context: "high-fidelity runs on the selected subset",
            });
        }
        let mut solver = selection.chol.leading_factor(k);
        let cond = selection.gram_gamma.spectral_norm() * solver.inverse_spectral_norm();
        let ill_conditioned = !(cond <= ILL_CONDITIONED);
        if ill_conditioned {
            let g = &selection.gram_gamma;
            let ridge = 1e-12 * g.trace();
            solver = Cholesky::factor_regularized(g, ridge)?;
        }
        Ok(Self {
            selection,
            low,
            high_gamma,
            ip: ip.clone(),
            solver,
            ill_conditioned,
        })
    }

    pub fn ill_conditioned(&self) -> bool {
        self.ill_conditioned
    }

    /// Coefficients `c` of the projection, from `G_γ c = (⟨v, u_L^{i_j}⟩)_j`.
    pub fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = self
            .selection
            .gamma
            .iter()
            .map(|&i| self.ip.inner(v, self.low.member(i)))
            .collect();
        self.solve(&rhs)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.solver.solve(rhs)
    }

    /// `Σ c_j u_H^{i_j}` for given coefficients.
    pub fn combine(&self, c: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.high_gamma.grid().len()];
        for (cj, u) in c.iter().zip(self.high_gamma.members()) {
            for (o, v) in out.iter_mut().zip(u) {
                *o += cj * v;
            }
        }
        out
    }

    pub fn lift(&self, v: &[f64]) -> Vec<f64> {
        self.combine(&self.coefficients(v))
    }

    /// Lifts low-fidelity member `m`, reading its inner products from `W`.
    pub fn lift_member(&self, m: usize) -> Vec<f64> {
        let w = &self.selection.gram;
        let rhs: Vec<f64> = self.selection.gamma.iter().map(|&i| w[(m, i)]).collect();
        self.combine(&self.solve(&rhs))
    }
}

/// `u_B^m = 𝓘(γ, u_L^m)` for every low-fidelity member, on the
/// high-fidelity grid, tagged bifidelity.
pub fn build_bifidelity_ensemble(
    low: &Ensemble,
    high_gamma: &Ensemble,
    selection: &BifidelitySelection,
    ip: &InnerProduct,
) -> Result<Ensemble> {
    let lifter = Lifter::new(selection, low, high_gamma, ip)?;
    let members = (0..low.len()).map(|m| lifter.lift_member(m)).collect();
    Ensemble::new(
        high_gamma.grid().clone(),
        members,
        low.params().to_vec(),
        Fidelity::Bifidelity,
    )
}

/// Wall-clock accounting for `u_B(Γ)` against `u_H(Γ)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostModel {
    /// Mean seconds per low-fidelity run, `C_L`.
    pub low_cost: f64,
    /// Mean seconds per high-fidelity run, `C_H`.
    pub high_cost: f64,
    pub m_low: usize,
    pub m_high: usize,
    /// Selection, lifting and statistics, in seconds.
    pub overhead: f64,
}

impl CostModel {
    /// `C_L/C_H + M_H/M_L`
    pub fn predicted_ratio(&self) -> f64 {
        self.low_cost / self.high_cost + self.m_high as f64 / self.m_low as f64
    }

    /// `(M_L C_L + M_H C_H + overhead) / (M_L C_H)`
    pub fn measured_ratio(&self) -> f64 {
        let m_l = self.m_low as f64;
        (m_l * self.low_cost + self.m_high as f64 * self.high_cost + self.overhead)
            / (m_l * self.high_cost)
    }
}
