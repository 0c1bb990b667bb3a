use std::f64::consts::PI;

use phik::models::branin::{branin_stochastic_ensemble, draw_xi, BraninConfig, RANDOM_DIM};
use phik::models::ks::{
    close_periodic, ks_ensembles, ks_solve, trig_interpolate, Integrator, KsConfig, KsSolver,
};
use phik::Error;
use phik_core::ensemble::Fidelity;
use proptest::prelude::*;

fn initial(cfg: &KsConfig, n: usize) -> Vec<f64> {
    (0..n).map(|j| cfg.initial_condition(2.0 * PI * j as f64 / n as f64)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn zero_field_stays_zero() {
    let s = KsSolver::new(33.0, 64, 1e-3);
    let run = s.run(&[0.0; 64], 0.5, Integrator::IfRk4).unwrap();
    assert!(run.field.iter().all(|v| *v == 0.0));
}

#[test]
fn single_stable_mode_decays_at_linear_rate() {
    // With α < 4 the k = 1 mode is damped and, at small amplitude, the
    // nonlinearity is negligible over a short horizon.
    let n = 64;
    let alpha = 1.0;
    let eps = 1e-8;
    let u0: Vec<f64> = (0..n).map(|j| eps * (2.0 * PI * j as f64 / n as f64).cos()).collect();
    let t = 0.2;
    let run = KsSolver::new(alpha, n, 1e-3).run(&u0, t, Integrator::IfRk4).unwrap();
    let decay = ((alpha - 4.0) * t).exp();
    for (u, v) in run.field.iter().zip(&u0) {
        assert!((u - v * decay).abs() < 1e-12, "{u} vs {}", v * decay);
    }
}

/// Successive max-norm differences under halving of `dt`, and their ratios.
fn refinement_ratios(n: usize, t: f64, dts: &[f64], scheme: Integrator) -> Vec<f64> {
    let cfg = KsConfig::default();
    let u0 = initial(&cfg, n);
    let f: Vec<Vec<f64>> = dts
        .iter()
        .map(|&dt| {
            KsSolver::with_mean_mode(33.0, n, dt, cfg.remove_mean)
                .run(&u0, t, scheme)
                .unwrap()
                .field
        })
        .collect();
    let d: Vec<f64> = f.windows(2).map(|w| max_diff(&w[0], &w[1])).collect();
    d.windows(2).map(|w| w[0] / w[1]).collect()
}

#[test]
fn exponential_integrators_are_fourth_order_when_resolved() {
    // 16 modes keep |L|·dt moderate, so the stiff order reduction is absent.
    for scheme in [Integrator::IfRk4, Integrator::EtdRk4] {
        let r = refinement_ratios(16, 0.05, &[4e-4, 2e-4, 1e-4, 5e-5], scheme);
        assert!(r.iter().all(|r| (8.0..=32.0).contains(r)), "{scheme:?}: ratios {r:?}");
    }
}

#[test]
fn order_check_at_experiment_resolution() {
    let r = refinement_ratios(256, 0.5, &[4e-3, 2e-3, 1e-3], Integrator::IfRk4);
    assert!((8.0..=32.0).contains(&r[0]), "refinement ratio {}", r[0]);
}

#[test]
fn plain_rk4_blows_up_and_auto_falls_back() {
    let cfg = KsConfig::default();
    let u0 = initial(&cfg, 256);
    let s = KsSolver::with_mean_mode(cfg.alpha_exact, 256, cfg.dt, true);
    match s.run(&u0, 0.1, Integrator::Rk4) {
        Err(e @ Error::BlowUp { .. }) => assert_eq!(e.exit_code(), 3),
        other => panic!("expected blow-up, got {other:?}"),
    }
    let run = s.run(&u0, 0.1, Integrator::Auto).unwrap();
    assert_eq!(run.integrator, Integrator::IfRk4);
}

#[test]
fn fields_are_real() {
    let cfg = KsConfig {
        t_final: 1.0,
        ..KsConfig::default()
    };
    let run = ks_solve(33.0, 256, &cfg).unwrap();
    assert!(run.imag_max <= 1e-10, "imaginary part {}", run.imag_max);
    assert_eq!(run.field.len(), 256);
}

#[test]
fn midpoint_member_is_deterministic() {
    let cfg = KsConfig {
        t_final: 0.5,
        members: 3,
        stratified: true,
        ..KsConfig::default()
    };
    let e = ks_ensembles(&cfg, 0).unwrap();
    assert_eq!(e.alphas[1], 33.0);
    assert_eq!(&e.high.member(1)[..256], ks_solve(33.0, 256, &cfg).unwrap().field.as_slice());
    let again = ks_ensembles(&cfg, 0).unwrap();
    assert_eq!(e.low.members(), again.low.members());
    for m in e.high.members().iter().chain(e.low.members()) {
        assert!((m[0] - m[256]).abs() <= 1e-10);
    }
}

#[test]
fn branin_fidelities_share_draws() {
    let cfg = BraninConfig {
        members: 5,
        ..BraninConfig::default()
    };
    let hi = branin_stochastic_ensemble(&cfg, Fidelity::High, 3).unwrap();
    let lo = branin_stochastic_ensemble(&cfg, Fidelity::Low, 3).unwrap();
    assert_eq!(hi.params(), lo.params());
    // The 21×21 grid is every other node of the 41×41 grid.
    let (gh, gl) = (hi.grid(), lo.grid());
    for i in 0..gl.len() {
        let j = gh.node_index(&gl.point(i)).unwrap();
        for m in 0..5 {
            assert_eq!(lo.member(m)[i], hi.member(m)[j]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trig_interpolation_is_exact_on_band_limited_fields(
        coef in proptest::collection::vec(-1.0f64..1.0, 10),
    ) {
        let f = |x: f64| {
            coef.chunks(2)
                .enumerate()
                .map(|(k, c)| c[0] * (k as f64 * x).cos() + c[1] * (k as f64 * x).sin())
                .sum::<f64>()
        };
        let coarse: Vec<f64> = (0..32).map(|j| f(2.0 * PI * j as f64 / 32.0)).collect();
        let fine = close_periodic(&trig_interpolate(&coarse, 128));
        prop_assert_eq!(fine.len(), 129);
        for (j, v) in fine.iter().enumerate() {
            prop_assert!((v - f(2.0 * PI * j as f64 / 128.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn branin_member_is_affine_in_q_coefficients(
        seed in 0u64..1000,
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
        t in -2.0f64..2.0,
    ) {
        let cfg = BraninConfig::default();
        let xi = draw_xi(seed, 1)[0];
        let mut shifted = xi;
        for v in &mut shifted[6..] {
            *v += t;
        }
        let mid: [f64; RANDOM_DIM] = core::array::from_fn(|i| if i < 6 { xi[i] } else { xi[i] + 0.5 * t });
        let p = [x, y];
        let (a, b, c) = (cfg.eval_random(&p, &xi), cfg.eval_random(&p, &mid), cfg.eval_random(&p, &shifted));
        prop_assert!((a + c - 2.0 * b).abs() < 1e-9 * (1.0 + a.abs() + c.abs()));
    }
}
