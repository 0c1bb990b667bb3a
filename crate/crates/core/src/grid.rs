//! Structured uniform grids and multilinear interpolation on them.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Uniform 1-D axis: `start + i·step` for `i < len`.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    /// `len` equispaced nodes covering `[lo, hi]` including both ends.
    pub fn closed(lo: f64, hi: f64, len: usize) -> Self {
        let step = if len > 1 { (hi - lo) / (len - 1) as f64 } else { 0.0 };
        Self { start: lo, step, len }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.node(self.len.saturating_sub(1))
    }

    /// Bracketing node index and fractional offset of `x`, or `None` outside
    /// the axis (with a relative tolerance at the ends).
    fn bracket(&self, x: f64) -> Option<(usize, f64)> {
        if self.len == 1 {
            return ((x - self.start).abs() <= 1e-12 * self.start.abs().max(1.0)).then_some((0, 0.0));
        }
        let t = (x - self.start) / self.step;
        let last = (self.len - 1) as f64;
        let tol = 1e-9;
        if t < -tol || t > last + tol {
            return None;
        }
        let t = t.clamp(0.0, last);
        let mut i = libm::floor(t) as usize;
        let mut frac = t - i as f64;
        // Snap onto nodes so that on-grid queries hit exactly one node.
        if frac < tol {
            frac = 0.0;
        } else if frac > 1.0 - tol {
            i += 1;
            frac = 0.0;
        }
        if i >= self.len - 1 && frac > 0.0 {
            i = self.len - 1;
            frac = 0.0;
        }
        Some((i.min(self.len - 1), frac))
    }
}

/// Tensor-product grid with lexicographic node order (first axis slowest).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

/// Interpolation stencil: node indices and weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub nodes: Vec<(usize, f64)>,
}

impl Stencil {
    pub fn apply(&self, field: &[f64]) -> f64 {
        self.nodes.iter().map(|&(i, w)| w * field[i]).sum()
    }
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.len == 0) {
            return Err(Error::InvalidArgument("grid needs at least one non-empty axis".into()));
        }
        if axes.iter().any(|a| a.len > 1 && !(a.step > 0.0)) {
            return Err(Error::InvalidArgument("grid axis step must be positive".into()));
        }
        Ok(Self { axes })
    }

    /// Uniform grid over `[lo, hi]` per dimension with both ends included.
    pub fn uniform(bounds: &[(f64, f64)], counts: &[usize]) -> Result<Self> {
        if bounds.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                expected: bounds.len(),
                found: counts.len(),
                context: "grid bounds vs counts",
            });
        }
        Self::new(
            bounds
                .iter()
                .zip(counts)
                .map(|(&(lo, hi), &n)| Axis::closed(lo, hi, n))
                .collect(),
        )
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            out[k] = idx % a.len;
            idx /= a.len;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.len + i)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.node(i))
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Multilinear interpolation stencil for `x`, `None` outside the grid.
    pub fn stencil(&self, x: &[f64]) -> Option<Stencil> {
        if x.len() != self.dim() {
            return None;
        }
        let mut nodes = vec![(0usize, 1.0f64)];
        for (k, a) in self.axes.iter().enumerate() {
            let (i, frac) = a.bracket(x[k])?;
            let mut next = Vec::with_capacity(nodes.len() * 2);
            for &(flat, w) in &nodes {
                next.push((flat * a.len + i, w * (1.0 - frac)));
                if frac > 0.0 {
                    next.push((flat * a.len + i + 1, w * frac));
                }
            }
            nodes = next;
        }
        Some(Stencil { nodes })
    }

    /// Index of the grid node at `x`, if `x` is (within tolerance) a node.
    pub fn node_index(&self, x: &[f64]) -> Option<usize> {
        let s = self.stencil(x)?;
        (s.nodes.len() == 1).then(|| s.nodes[0].0)
    }

    /// Interpolates a field defined on this grid at `x`.
    pub fn interpolate(&self, field: &[f64], x: &[f64]) -> Option<f64> {
        self.stencil(x).map(|s| s.apply(field))
    }

    /// Restriction of a field on `self` to the nodes of a coarser grid whose
    /// nodes are all nodes of `self`.
    pub fn restrict_to(&self, field: &[f64], coarse: &Grid) -> Result<Vec<f64>> {
        (0..coarse.len())
            .map(|i| {
                let p = coarse.point(i);
                self.node_index(&p)
                    .map(|j| field[j])
                    .ok_or_else(|| Error::GridMismatch("coarse node is not a fine node".into()))
            })
            .collect()
    }
}
