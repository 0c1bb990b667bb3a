mod common;

use common::{distance_to_span, ensemble, gauss_solve, line_grid, random_vec, rng};
use phik_core::cokriging::{
    assemble_joint_cov, cokriging_posterior, fit_cokriging, CoKrigingModel, RhoGrid,
};
use phik_core::cophik::{fit_cophik, fit_cophik_with_prior};
use phik_core::ensemble::Fidelity;
use phik_core::gp::{
    fit_ordinary_kriging, posterior, GaussianKernel, GpModel, HyperSearchConfig, Observations,
    StationaryGp,
};
use phik_core::linalg::{Cholesky, Matrix, SymMatrix};
use phik_core::phik::phik_posterior;
use phik_core::Error;
use proptest::prelude::*;
use rand::Rng;

fn fast_search() -> HyperSearchConfig {
    HyperSearchConfig {
        restarts: 3,
        max_evals: 150,
        ..HyperSearchConfig::default()
    }
}

fn stationary(mean: f64, variance: f64, l: f64) -> StationaryGp {
    StationaryGp {
        mean,
        kernel: GaussianKernel::new(variance, vec![l]).unwrap(),
    }
}

#[test]
fn joint_cov_examples() {
    let c = assemble_joint_cov(
        &SymMatrix::identity(1),
        &Matrix::identity(1),
        &SymMatrix::identity(1),
        &SymMatrix::from_diagonal(&[0.5]),
        2.0,
    )
    .unwrap();
    assert_eq!(
        (c.as_matrix()[(0, 0)], c.as_matrix()[(0, 1)], c.as_matrix()[(1, 1)]),
        (1.0, 2.0, 4.5)
    );

    // ρ = 1, C_d = 0, X_L = X_H: four identical blocks of rank N_L
    let cl = SymMatrix::from_lower_fn(2, |i, j| if i == j { 2.0 } else { 0.5 });
    let c = assemble_joint_cov(&cl, cl.as_matrix(), &cl, &SymMatrix::from_diagonal(&[0.0, 0.0]), 1.0).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(c.as_matrix()[(i, j)], cl.as_matrix()[(i % 2, j % 2)]);
        }
    }
    assert!(Cholesky::factor(&c, 0.0).is_err());
}

/// `C̃` against the covariance of the stacked vector written as a linear map
/// of the independent vector `(Y_L(X_L), Y_L(X_H), Y_d(X_H))`.
#[test]
fn joint_cov_matches_stacked_process() {
    let mut r = rng(21);
    for _ in 0..20 {
        let rho = r.gen_range(-2.0..3.0);
        let low = stationary(0.3, r.gen_range(0.5..2.0), r.gen_range(0.2..1.0));
        let delta = stationary(-0.1, r.gen_range(0.1..1.0), r.gen_range(0.2..1.0));
        let xl: Vec<Vec<f64>> = (0..2).map(|_| vec![r.gen_range(0.0..1.0)]).collect();
        let xh: Vec<Vec<f64>> = (0..2).map(|_| vec![r.gen_range(0.0..1.0)]).collect();
        let model = CoKrigingModel::new(rho, low.clone(), delta.clone(), xl.clone(), xh.clone()).unwrap();

        let pts: Vec<&Vec<f64>> = xl.iter().chain(&xh).collect();
        let mut sigma = vec![vec![0.0; 6]; 6];
        for i in 0..4 {
            for j in 0..4 {
                sigma[i][j] = low.cov(pts[i], pts[j]);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                sigma[4 + i][4 + j] = delta.cov(&xh[i], &xh[j]);
            }
        }
        // rows: Y_L(xl₀), Y_L(xl₁), ρY_L(xh₀) + Y_d(xh₀), ρY_L(xh₁) + Y_d(xh₁)
        let t = [
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, rho, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, rho, 0.0, 1.0],
        ];
        for a in 0..4 {
            for b in 0..4 {
                let mut v = 0.0;
                for i in 0..6 {
                    for j in 0..6 {
                        v += t[a][i] * sigma[i][j] * t[b][j];
                    }
                }
                assert!((model.joint_cov.as_matrix()[(a, b)] - v).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn zero_rho_reduces_to_kriging_of_discrepancy() {
    let mut r = rng(4);
    for n in 1..=4 {
        let low = stationary(1.0, 1.5, 0.4);
        let delta = stationary(0.2, 0.7, 0.3);
        let xl: Vec<Vec<f64>> = (0..n).map(|i| vec![0.1 + 0.2 * i as f64]).collect();
        let xh: Vec<Vec<f64>> = (0..n).map(|i| vec![0.15 + 0.2 * i as f64]).collect();
        let yl = random_vec(&mut r, n);
        let yh = random_vec(&mut r, n);
        let model = CoKrigingModel::new(0.0, low, delta.clone(), xl, xh.clone()).unwrap();
        let mut yt = yl;
        yt.extend_from_slice(&yh);
        let q: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 6.0]).collect();
        let co = cokriging_posterior(&model, &yt, &q, 0.0).unwrap();
        let k = posterior(&delta, &Observations::new(xh, yh).unwrap(), &q, 0.0).unwrap();
        for i in 0..q.len() {
            assert!((co.mean[i] - k.mean[i]).abs() < 1e-10);
            assert!((co.mse[i] - k.mse[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn cokriging_interpolates_high_fidelity_and_reverts_far_away() {
    let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0]).collect();
    let yl: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin()).collect();
    let xh: Vec<Vec<f64>> = xs.iter().step_by(3).cloned().collect();
    let yh: Vec<f64> = xh.iter().map(|x| 1.5 * (6.0 * x[0]).sin() + x[0] * x[0]).collect();
    let low = Observations::new(xs, yl).unwrap();
    let high = Observations::new(xh.clone(), yh.clone()).unwrap();
    let (model, yt) = fit_cokriging(&low, &high, &fast_search()).unwrap();
    let p = cokriging_posterior(&model, &yt, &xh, 0.0).unwrap();
    let scale = yh.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in p.mean.iter().zip(&yh) {
        assert!((a - b).abs() <= 1e-6 * scale);
    }
    let far = cokriging_posterior(&model, &yt, &[vec![1e3]], 0.0).unwrap();
    assert!((far.mean[0] - (model.rho * model.low.mean + model.delta.mean)).abs() < 1e-9);
}

#[test]
fn affine_fidelities_recover_rho_and_offset() {
    let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0]).collect();
    let yl: Vec<f64> = xs.iter().map(|x| (5.0 * x[0]).cos() + x[0]).collect();
    let yh: Vec<f64> = yl.iter().map(|v| 2.0 * v + 3.0).collect();
    let low = Observations::new(xs.clone(), yl).unwrap();
    let high = Observations::new(xs, yh).unwrap();
    let (model, _) = fit_cokriging(&low, &high, &fast_search()).unwrap();
    // brute-force oracle over the same coarse grid: only ρ = 2 leaves y_d constant
    let oracle = RhoGrid::default()
        .coarse()
        .into_iter()
        .find(|rho| {
            let yd: Vec<f64> = high.values().iter().zip(low.values()).map(|(h, l)| h - rho * l).collect();
            fit_ordinary_kriging(&high.with_values(yd).unwrap(), &fast_search()).unwrap().degenerate
        })
        .unwrap();
    assert!((oracle - 2.0).abs() < 1e-12);
    assert!((model.rho - 2.0).abs() < 1e-9);
    assert!((model.delta.mean - 3.0).abs() < 1e-9);
    assert!(model.delta_degenerate);
}

#[test]
fn missing_low_fidelity_value_is_reported() {
    let low = Observations::new(vec![vec![0.0], vec![0.5]], vec![1.0, 2.0]).unwrap();
    let high = Observations::new(vec![vec![0.5], vec![0.7]], vec![1.0, 2.0]).unwrap();
    assert!(matches!(
        fit_cokriging(&low, &high, &fast_search()),
        Err(Error::MissingCommonPoints { index: 1 })
    ));
}

#[test]
fn phik_examples() {
    // one observation: ŷ = μ + k(x, x₁)/k(x₁, x₁)·(y₁ − μ(x₁))
    let g = line_grid(5);
    let e = ensemble(
        &g,
        vec![vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![1.0, 1.0, 1.0, 1.0, 1.0], vec![2.0, 0.0, 1.0, 0.5, 0.0]],
        Fidelity::High,
    );
    let gp = e.statistics().unwrap();
    let x1 = g.point(2);
    let obs = Observations::new(vec![x1.clone()], vec![3.0]).unwrap();
    let p = phik_posterior(&e, &obs, &g.points(), 0.0).unwrap();
    for (i, x) in g.points().iter().enumerate() {
        let expect = gp.mean(x) + gp.cov(x, &x1) / gp.cov(&x1, &x1) * (3.0 - gp.mean(&x1));
        assert!((p.mean[i] - expect).abs() < 1e-12);
    }

    // data drawn from a member are reproduced at the observation points
    let obs = Observations::new(vec![g.point(0), g.point(3)], vec![2.0, 0.5]).unwrap();
    let p = phik_posterior(&e, &obs, obs.locations(), 0.0).unwrap();
    assert!((p.mean[0] - 2.0).abs() < 1e-8 && (p.mean[1] - 0.5).abs() < 1e-8);
}

#[test]
fn single_member_ensemble_is_rejected() {
    let g = line_grid(3);
    let e = ensemble(&g, vec![vec![1.0, 2.0, 3.0]], Fidelity::High);
    let obs = Observations::new(vec![vec![0.0]], vec![1.0]).unwrap();
    let err = phik_posterior(&e, &obs, &[vec![0.5]], 0.0).unwrap_err();
    assert_eq!(err.to_string(), "ensemble must have at least two members");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn ensemble_covariance_is_psd(seed in any::<u64>(), m in 2usize..=8, n in 1usize..=10) {
        let mut r = rng(seed);
        let g = line_grid(12);
        let e = ensemble(&g, (0..m).map(|_| random_vec(&mut r, 12)).collect(), Fidelity::High);
        let gp = e.statistics().unwrap();
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(0.0..1.0)]).collect();
        let c = gp.cov_matrix(&x);
        let tol = 1e-8 * c.trace() / n as f64;
        prop_assert!(Cholesky::factor(&c, tol.max(1e-300)).is_ok());
    }

    #[test]
    fn phik_mean_lies_in_ensemble_span(seed in any::<u64>(), m in 2usize..=5, n in 1usize..=3) {
        let mut r = rng(seed);
        let g = line_grid(8);
        let members: Vec<Vec<f64>> = (0..m).map(|_| random_vec(&mut r, 8)).collect();
        let e = ensemble(&g, members.clone(), Fidelity::High);
        let gp = e.statistics().unwrap();
        let mut nodes: Vec<usize> = (0..8).collect();
        rand::seq::SliceRandom::shuffle(nodes.as_mut_slice(), &mut r);
        let obs = Observations::new(
            nodes[..n].iter().map(|&i| g.point(i)).collect(),
            random_vec(&mut r, n),
        ).unwrap();
        let p = phik_posterior(&e, &obs, &g.points(), 0.0).unwrap();
        let shift: Vec<f64> = p.mean.iter().zip(gp.mean_field()).map(|(a, b)| a - b).collect();
        let anomalies: Vec<Vec<f64>> = members
            .iter()
            .map(|u| u.iter().zip(gp.mean_field()).map(|(a, b)| a - b).collect())
            .collect();
        // an independent subset spans the same space as all anomalies
        let mut basis: Vec<&[f64]> = Vec::new();
        for a in &anomalies {
            if distance_to_span(a, &basis) > 1e-9 * common::dot(a, a).sqrt() {
                basis.push(a);
            }
        }
        let d = distance_to_span(&shift, &basis);
        prop_assert!(d <= 1e-8 * (1.0 + common::dot(&shift, &shift).sqrt()));
    }

    #[test]
    fn phik_preserves_member_constraints(seed in any::<u64>(), m in 2usize..=6) {
        let mut r = rng(seed);
        let n = 10;
        let g = line_grid(n);
        let members: Vec<Vec<f64>> = (0..m).map(|_| {
            let mut u = random_vec(&mut r, n);
            u[n - 1] = u[0];
            u
        }).collect();
        let e = ensemble(&g, members, Fidelity::High);
        let obs = Observations::new(vec![g.point(3), g.point(6)], random_vec(&mut r, 2)).unwrap();
        let p = phik_posterior(&e, &obs, &g.points(), 0.0).unwrap();
        let range = p.mean.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b))
            - p.mean.iter().fold(f64::INFINITY, |a, b| a.min(*b));
        prop_assert!((p.mean[0] - p.mean[n - 1]).abs() <= 1e-6 * range.max(1e-12));
    }
}

/// Exhaustive CoPhIK oracle: for every ρ on the sweep, fit `Y_d`, evaluate
/// the Gaussian log density of `ỹ` for each member by elimination, and keep
/// the first strict maximum.
fn cophik_oracle(
    e: &phik_core::ensemble::Ensemble,
    obs: &Observations,
    grid: &RhoGrid,
) -> (f64, usize) {
    let gp = e.statistics().unwrap();
    let x = obs.locations();
    let n = x.len();
    let mu_l = gp.mean_vector(x);
    let score = |rho: f64| -> Vec<f64> {
        let yd: Vec<f64> = obs.values().iter().zip(&mu_l).map(|(h, m)| h - rho * m).collect();
        let fit = fit_ordinary_kriging(&obs.with_values(yd).unwrap(), &fast_search()).unwrap();
        let model = CoKrigingModel::new(rho, gp.clone(), fit.model.clone(), x.to_vec(), x.to_vec()).unwrap();
        let ridge = Cholesky::factor_regularized(&model.joint_cov, 0.0).unwrap().ridge();
        let c: Vec<Vec<f64>> = (0..2 * n)
            .map(|i| (0..2 * n).map(|j| model.joint_cov.as_matrix()[(i, j)] + if i == j { ridge } else { 0.0 }).collect())
            .collect();
        (0..e.len())
            .map(|m| {
                if fit.degenerate {
                    return f64::INFINITY;
                }
                let mut y: Vec<f64> = x.iter().map(|p| e.member_at(m, p).unwrap()).collect();
                y.extend_from_slice(obs.values());
                let r: Vec<f64> = y.iter().zip(&model.joint_mean).map(|(a, b)| a - b).collect();
                let z = gauss_solve(&c, &r).unwrap();
                -0.5 * common::dot(&r, &z) - 0.5 * log_det(&c)
            })
            .collect()
    };
    let mut best: Option<(f64, usize, f64)> = None;
    let visit = |rho: f64, best: &mut Option<(f64, usize, f64)>| {
        for (m, s) in score(rho).into_iter().enumerate() {
            if best.map_or(true, |b| s > b.2) {
                *best = Some((rho, m, s));
            }
        }
    };
    for rho in grid.coarse() {
        visit(rho, &mut best);
    }
    let center = best.unwrap().0;
    for rho in grid.refined(center) {
        visit(rho, &mut best);
    }
    let (rho, m, _) = best.unwrap();
    (rho, m)
}

fn log_det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut ld = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        ld += m[c][c].abs().ln();
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    ld
}

#[test]
fn cophik_selection_matches_exhaustive_oracle() {
    let grid = RhoGrid { count: 11, refine_count: 5, ..RhoGrid::default() };
    for t in 0..20 {
        let mut r = rng(300 + t);
        let g = line_grid(9);
        let m = r.gen_range(2..=5);
        let e = ensemble(&g, (0..m).map(|_| random_vec(&mut r, 9)).collect(), Fidelity::High);
        let n = r.gen_range(2..=3);
        let obs = Observations::new(
            (0..n).map(|i| g.point(1 + 3 * i)).collect(),
            random_vec(&mut r, n),
        )
        .unwrap();
        let fit = fit_cophik(&e, &obs, &fast_search(), &grid, 0.0).unwrap();
        let (rho, member) = cophik_oracle(&e, &obs, &grid);
        assert_eq!((fit.model.rho, fit.member), (rho, member), "trial {t}");
    }
}

#[test]
fn cophik_selection_survives_candidate_duplication() {
    let grid = RhoGrid { count: 11, refine_count: 5, ..RhoGrid::default() };
    for t in 0..20 {
        let mut r = rng(400 + t);
        let g = line_grid(9);
        let m = r.gen_range(2..=4);
        let e = ensemble(&g, (0..m).map(|_| random_vec(&mut r, 9)).collect(), Fidelity::High);
        let doubled: Vec<usize> = (0..m).flat_map(|i| [i, i]).collect();
        let e2 = e.subset(&doubled);
        let obs = Observations::new(vec![g.point(2), g.point(6)], random_vec(&mut r, 2)).unwrap();
        let a = fit_cophik(&e, &obs, &fast_search(), &grid, 0.0).unwrap();
        let prior = e.statistics().unwrap();
        let b = fit_cophik_with_prior(prior, &e2, &obs, &fast_search(), &grid, 0.0).unwrap();
        assert_eq!(b.member % 2, 0, "duplicates tie towards the lower index");
        assert_eq!(e.member(a.member), e2.member(b.member), "trial {t}");
        assert_eq!(a.model.rho, b.model.rho);
    }
}

#[test]
fn duplicating_members_rescales_the_prior() {
    // Re-deriving statistics from a duplicated ensemble multiplies k_MC by
    // 2(M − 1)/(2M − 1), so selection there is not guaranteed to match.
    let g = line_grid(4);
    let e = ensemble(&g, vec![vec![0.0; 4], vec![2.0; 4]], Fidelity::High);
    let e2 = e.subset(&[0, 0, 1, 1]);
    let (k, k2) = (e.statistics().unwrap(), e2.statistics().unwrap());
    assert_eq!(k.mean_field(), k2.mean_field());
    assert!((k2.cov(&[0.0], &[1.0]) / k.cov(&[0.0], &[1.0]) - 2.0 / 3.0).abs() < 1e-14);
}

#[test]
fn cophik_degenerate_structures() {
    let mut r = rng(77);
    let g = line_grid(8);
    let e = ensemble(&g, (0..4).map(|_| random_vec(&mut r, 8)).collect(), Fidelity::High);
    let gp = e.statistics().unwrap();
    for n in 1..=3 {
        let x: Vec<Vec<f64>> = (0..n).map(|i| g.point(1 + 2 * i)).collect();
        let yh = random_vec(&mut r, n);
        let zero = stationary(0.25, 0.0, 1.0);

        // ρ = 0 and Y_d ≡ μ_d: only the prior mean μ_d remains
        let model = CoKrigingModel::new(0.0, gp.clone(), zero.clone(), x.clone(), x.clone()).unwrap();
        let mut yt: Vec<f64> = x.iter().map(|p| e.member_at(0, p).unwrap()).collect();
        yt.extend_from_slice(&yh);
        let p = cokriging_posterior(&model, &yt, &g.points(), 0.0).unwrap();
        assert!(p.mean.iter().all(|v| (v - 0.25).abs() < 1e-9));

        // ρ = 1, Y_d ≡ 0, y_L = μ_L: ŷ = μ_L + k(·,X)ᵀ(2C + εI)⁻¹(y_H − μ_L)
        let zero = stationary(0.0, 0.0, 1.0);
        let model = CoKrigingModel::new(1.0, gp.clone(), zero, x.clone(), x.clone()).unwrap();
        let mu = gp.mean_vector(&x);
        let mut yt = mu.clone();
        yt.extend_from_slice(&yh);
        let p = cokriging_posterior(&model, &yt, &g.points(), 0.0).unwrap();
        let c = gp.cov_matrix(&x);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| 2.0 * c.as_matrix()[(i, j)] + if i == j { p.ridge } else { 0.0 }).collect())
            .collect();
        let rhs: Vec<f64> = yh.iter().zip(&mu).map(|(h, m)| h - m).collect();
        let w = gauss_solve(&a, &rhs).unwrap();
        for (i, q) in g.points().iter().enumerate() {
            let expect = gp.mean(q) + common::dot(&gp.cross_cov(q, &x), &w);
            assert!((p.mean[i] - expect).abs() < 1e-6 * (1.0 + expect.abs()), "n={n} i={i}");
        }
    }
}
