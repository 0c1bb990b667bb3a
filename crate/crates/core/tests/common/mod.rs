// Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use phik_core::ensemble::{Ensemble, Fidelity};
use phik_core::gp::Observations;
use phik_core::grid::Grid;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    Some(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Distance from `v` to span(`basis`) in the Euclidean norm, by normal
/// equations solved with `gauss_solve`.
pub fn distance_to_span(v: &[f64], basis: &[&[f64]]) -> f64 {
    if basis.is_empty() {
        return dot(v, v).sqrt();
    }
    let g: Vec<Vec<f64>> = basis
        .iter()
        .map(|a| basis.iter().map(|b| dot(a, b)).collect())
        .collect();
    let rhs: Vec<f64> = basis.iter().map(|a| dot(a, v)).collect();
    let c = gauss_solve(&g, &rhs).expect("independent basis");
    let mut r = v.to_vec();
    for (ci, b) in c.iter().zip(basis) {
        for (ri, bi) in r.iter_mut().zip(b.iter()) {
            *ri -= ci * bi;
        }
    }
    dot(&r, &r).sqrt()
}

/// Greedy selection: repeatedly take the member furthest from the span of
/// those already chosen; the first occurrence wins ties.
pub fn greedy_distance_order(members: &[Vec<f64>], k: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for _ in 0..k {
        let basis: Vec<&[f64]> = chosen.iter().map(|&i| members[i].as_slice()).collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, u) in members.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let d = distance_to_span(u, &basis);
            if best.map_or(true, |(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        chosen.push(best.unwrap().0);
    }
    chosen
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn line_grid(n: usize) -> Grid {
    Grid::uniform(&[(0.0, 1.0)], &[n]).unwrap()
}

pub fn ensemble(grid: &Grid, members: Vec<Vec<f64>>, fidelity: Fidelity) -> Ensemble {
    let params = (0..members.len()).map(|m| vec![m as f64]).collect();
    Ensemble::new(grid.clone(), members, params, fidelity).unwrap()
}

/// A random bound-checking instance: high and bifidelity ensembles on one
/// 1-D grid with observations at distinct grid nodes.
pub struct Instance {
    pub high: Ensemble,
    pub bifi: Ensemble,
    pub obs: Observations,
}

/// `M ∈ [2, 6]`, `N ∈ [1, min(4, M − 1)]`, `n ∈ [N + 2, 12]` nodes. The
/// bifidelity members are the high ones plus a perturbation whose scale
/// spans several decades.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let m = rng.gen_range(2..=6);
    let nobs = rng.gen_range(1..=4.min(m - 1));
    let n = rng.gen_range(nobs + 2..=12);
    let grid = line_grid(n);
    let offset = rng.gen_range(-2.0..2.0);
    let high: Vec<Vec<f64>> = (0..m)
        .map(|_| random_vec(rng, n).into_iter().map(|v| v + offset).collect())
        .collect();
    let scale = 10f64.powf(rng.gen_range(-4.0..0.0));
    let bifi: Vec<Vec<f64>> = high
        .iter()
        .map(|u| u.iter().map(|v| v + scale * rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    let locations: Vec<Vec<f64>> = nodes[..nobs].iter().map(|&i| grid.point(i)).collect();
    let values = (0..nobs).map(|_| offset + rng.gen_range(-1.5..1.5)).collect();
    Instance {
        high: ensemble(&grid, high, Fidelity::High),
        bifi: ensemble(&grid, bifi, Fidelity::Bifidelity),
        obs: Observations::new(locations, values).unwrap(),
    }
}
