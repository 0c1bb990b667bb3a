//! Modified Branin function on `[0,1]²` and its randomized version with
//! twelve Gaussian coefficients.

use std::f64::consts::PI;

use phik_core::ensemble::{Ensemble, Fidelity};
use phik_core::gp::Observations;
use phik_core::grid::Grid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const RANDOM_DIM: usize = 12;

/// Observation sites used in the experiment.
pub const PAPER_OBSERVATIONS: [[f64; 2]; 8] = [
    [0.1, 0.225],
    [0.475, 0.2],
    [0.625, 0.5],
    [0.675, 0.55],
    [0.7, 0.0],
    [0.775, 0.1],
    [0.8, 0.9],
    [0.925, 0.9],
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BraninConfig {
    pub grid_high: [usize; 2],
    pub grid_low: [usize; 2],
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r: f64,
    pub g: f64,
    pub p: f64,
    pub q: f64,
    /// `g` in the randomized model.
    pub g_hat: f64,
    pub members: usize,
}

impl Default for BraninConfig {
    fn default() -> Self {
        Self {
            grid_high: [41, 41],
            grid_low: [21, 21],
            a: 1.0,
            b: 5.1 / (4.0 * PI * PI),
            c: 5.0 / PI,
            r: 6.0,
            g: 10.0,
            p: 1.0 / (8.0 * PI),
            q: 5.0,
            g_hat: 20.0,
            members: 300,
        }
    }
}

impl BraninConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_high.iter().chain(&self.grid_low).any(|&n| n < 2) {
            return Err(Error::Config("Branin grids need at least 2 nodes per axis".into()));
        }
        if self.members == 0 {
            return Err(Error::Config("members must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self, fidelity: Fidelity) -> Grid {
        let shape = match fidelity {
            Fidelity::Low => self.grid_low,
            _ => self.grid_high,
        };
        Grid::uniform(&[(0.0, 1.0), (0.0, 1.0)], &shape).expect("valid Branin grid")
    }

    /// `g_hat` replaces the additive constant only; the cosine keeps `g`.
    fn shape(&self, x: &[f64], b: f64, g_hat: f64, q: f64) -> f64 {
        let xb = 15.0 * x[0] - 5.0;
        let yb = 15.0 * x[1];
        let t = yb - b * xb * xb + self.c * xb - self.r;
        self.a * t * t + self.g * (1.0 - self.p) * xb.cos() + g_hat + q * x[0]
    }

    /// The deterministic field.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.shape(x, self.b, self.g, self.q)
    }

    /// One realization of the randomized field for coefficients `xi`.
    pub fn eval_random(&self, x: &[f64], xi: &[f64; RANDOM_DIM]) -> f64 {
        let (px, py) = (PI * x[0], PI * x[1]);
        let mut sb = 0.0;
        let mut sq = 0.0;
        for i in 1..=3 {
            let fi = i as f64;
            sb += ((2.0 * fi - 0.5) * px).sin() * xi[2 * i - 2] / (4.0 * fi - 1.0)
                + ((2.0 * fi + 0.5) * py).sin() * xi[2 * i - 1] / (4.0 * fi + 1.0);
            sq += ((2.0 * fi - 1.5) * px).cos() * xi[2 * i + 4] / (4.0 * fi - 3.0)
                + ((2.0 * fi - 0.5) * py).cos() * xi[2 * i + 5] / (4.0 * fi - 1.0);
        }
        let b = self.b * (0.9 + 0.2 / PI * sb);
        let q = self.q * (1.0 + 0.6 / PI * sq);
        self.shape(x, b, self.g_hat, q)
    }
}

/// `f` on the high-fidelity grid.
pub fn branin_truth(cfg: &BraninConfig) -> (Grid, Vec<f64>) {
    let grid = cfg.grid(Fidelity::High);
    let f = grid.points().iter().map(|x| cfg.eval(x)).collect();
    (grid, f)
}

/// `members` i.i.d. standard normal 12-vectors from the seeded generator.
pub fn draw_xi(seed: u64, members: usize) -> Vec<[f64; RANDOM_DIM]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..members)
        .map(|_| {
            let mut xi = [0.0; RANDOM_DIM];
            for v in &mut xi {
                *v = StandardNormal.sample(&mut rng);
            }
            xi
        })
        .collect()
}

/// Realizations on the grid of the given fidelity. The draws depend only on
/// the seed, so both fidelities share `ξ` member by member.
pub fn branin_stochastic_ensemble(cfg: &BraninConfig, fidelity: Fidelity, seed: u64) -> Result<Ensemble> {
    cfg.validate()?;
    let grid = cfg.grid(fidelity);
    let points = grid.points();
    let xis = draw_xi(seed, cfg.members);
    let members = xis
        .iter()
        .map(|xi| points.iter().map(|x| cfg.eval_random(x, xi)).collect())
        .collect();
    let params = xis.iter().map(|xi| xi.to_vec()).collect();
    Ok(Ensemble::new(grid, members, params, fidelity)?)
}

/// The eight observation sites snapped to high-grid nodes, with values of
/// `f` there.
pub fn branin_observations(cfg: &BraninConfig) -> Result<Observations> {
    let grid = cfg.grid(Fidelity::High);
    let mut locations = Vec::new();
    for p in PAPER_OBSERVATIONS {
        let i = grid
            .node_index(&p)
            .ok_or_else(|| Error::Config(format!("observation {p:?} is not a node of the Branin grid")))?;
        locations.push(grid.point(i));
    }
    let values = locations.iter().map(|x| cfg.eval(x)).collect();
    Ok(Observations::new(locations, values)?)
}
