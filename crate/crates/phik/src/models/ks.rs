//! Kuramoto–Sivashinsky equation `u_t + 4u_xxxx + α(u_xx + ½u_x²) = 0` on a
//! 2π-periodic domain, Fourier pseudospectral in space.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use phik_core::ensemble::{Ensemble, Fidelity};
use phik_core::gp::Observations;
use phik_core::grid::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Spectral magnitude (normalized by the grid size) treated as blow-up.
pub const BLOW_UP: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Classical RK4 on the full right-hand side.
    Rk4,
    /// RK4 on the integrating-factor form; the linear part is exact.
    IfRk4,
    /// Exponential time differencing RK4; the linear part is exact and
    /// stiff modes relax to their slaved values.
    EtdRk4,
    /// Classical RK4, falling back to `IfRk4` on blow-up.
    Auto,
}

impl Integrator {
    pub fn as_str(self) -> &'static str {
        match self {
            Integrator::Rk4 => "rk4",
            Integrator::IfRk4 => "if-rk4",
            Integrator::EtdRk4 => "etd-rk4",
            Integrator::Auto => "auto",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KsConfig {
    pub modes_high: usize,
    pub modes_low: usize,
    pub dt: f64,
    pub t_final: f64,
    pub alpha_exact: f64,
    pub alpha_range: (f64, f64),
    pub members: usize,
    /// Coefficients of cos(2x), cos(4x), cos(6x), cos(8x) in `u₀`.
    pub initial: Vec<f64>,
    pub integrator: Integrator,
    /// Equispaced α quantiles instead of random draws.
    pub stratified: bool,
    /// Drop the spatial-mean drift `−(α/2)⟨u_x²⟩` so fields stay mean-free.
    pub remove_mean: bool,
}

impl Default for KsConfig {
    fn default() -> Self {
        Self {
            modes_high: 256,
            modes_low: 128,
            dt: 1e-3,
            t_final: 5.0,
            alpha_exact: 37.545,
            alpha_range: (30.0, 36.0),
            members: 400,
            initial: vec![2.9420, 0.4642, 0.0410, 0.0034],
            integrator: Integrator::Auto,
            stratified: false,
            remove_mean: true,
        }
    }
}

impl KsConfig {
    pub fn validate(&self) -> Result<()> {
        let even = |n: usize| n >= 4 && n % 2 == 0;
        if !even(self.modes_high) || !even(self.modes_low) || self.modes_low > self.modes_high {
            return Err(Error::Config(format!(
                "modes must be even, at least 4, with low ({}) <= high ({})",
                self.modes_low, self.modes_high
            )));
        }
        if !(self.dt > 0.0) || !(self.t_final >= 0.0) {
            return Err(Error::Config("dt must be positive and t_final non-negative".into()));
        }
        let (lo, hi) = self.alpha_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config(format!("bad alpha range [{lo}, {hi}]")));
        }
        if self.members == 0 {
            return Err(Error::Config("members must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_condition(&self, x: f64) -> f64 {
        self.initial
            .iter()
            .enumerate()
            .map(|(i, c)| c * (2.0 * (i + 1) as f64 * x).cos())
            .sum()
    }

    /// α samples: i.i.d. uniform from the seeded generator, or midpoints of
    /// equal-probability strata.
    pub fn alphas(&self, seed: u64) -> Vec<f64> {
        let (lo, hi) = self.alpha_range;
        let m = self.members;
        if self.stratified {
            (0..m).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / m as f64).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..m).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect()
        }
    }
}

/// Final state of one integration.
#[derive(Clone, Debug, PartialEq)]
pub struct KsRun {
    /// `u(x_j, T)` at `x_j = 2πj/n`, `j < n`.
    pub field: Vec<f64>,
    /// Largest imaginary part seen in the inverse transform of the output.
    pub imag_max: f64,
    pub integrator: Integrator,
    pub seconds: f64,
}

pub struct KsSolver {
    n: usize,
    pad: usize,
    alpha: f64,
    dt: f64,
    remove_mean: bool,
    /// Derivative multipliers `ik` (zero at the Nyquist mode).
    ik: Vec<Complex64>,
    linear: Vec<f64>,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

fn wavenumber(j: usize, n: usize) -> f64 {
    if j < n / 2 {
        j as f64
    } else if j == n / 2 {
        0.0
    } else {
        j as f64 - n as f64
    }
}

impl KsSolver {
    pub fn new(alpha: f64, n: usize, dt: f64) -> Self {
        Self::with_mean_mode(alpha, n, dt, false)
    }

    /// As [`KsSolver::new`]; with `remove_mean` the zero mode is not
    /// forced, which only removes the mean drift (nothing else depends on it).
    pub fn with_mean_mode(alpha: f64, n: usize, dt: f64, remove_mean: bool) -> Self {
        let pad = 3 * n / 2;
        let mut planner = FftPlanner::new();
        let ik = (0..n).map(|j| Complex64::new(0.0, wavenumber(j, n))).collect();
        let linear = (0..n)
            .map(|j| {
                // The Nyquist mode keeps its true |k| for the linear decay.
                let k = if j == n / 2 { (n / 2) as f64 } else { wavenumber(j, n) };
                alpha * k * k - 4.0 * k.powi(4)
            })
            .collect();
        Self {
            n,
            pad,
            alpha,
            dt,
            remove_mean,
            ik,
            linear,
            fwd_n: planner.plan_fft_forward(n),
            inv_n: planner.plan_fft_inverse(n),
            fwd_pad: planner.plan_fft_forward(pad),
            inv_pad: planner.plan_fft_inverse(pad),
        }
    }

    /// `−(α/2)·FFT(u_x²)` with the 3/2 rule; unnormalized transforms.
    fn nonlinear(&self, u_hat: &[Complex64], out: &mut [Complex64], buf: &mut [Complex64]) {
        let (n, m) = (self.n, self.pad);
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for j in 0..n / 2 {
            buf[j] = u_hat[j] * self.ik[j];
        }
        for j in n / 2 + 1..n {
            buf[m - (n - j)] = u_hat[j] * self.ik[j];
        }
        self.inv_pad.process(buf);
        let s = 1.0 / n as f64;
        for b in buf.iter_mut() {
            let v = b.re * s;
            *b = Complex64::new(v * v, 0.0);
        }
        self.fwd_pad.process(buf);
        let c = -0.5 * self.alpha * n as f64 / m as f64;
        for j in 0..n / 2 {
            out[j] = buf[j] * c;
        }
        out[n / 2] = Complex64::new(0.0, 0.0);
        for j in n / 2 + 1..n {
            out[j] = buf[m - (n - j)] * c;
        }
        if self.remove_mean {
            out[0] = Complex64::new(0.0, 0.0);
        }
    }

    /// Projects onto conjugate-symmetric spectra (real fields). Without it
    /// the imaginary part, which the nonlinear term never sees, grows at the
    /// linear instability rate from roundoff.
    fn make_real(&self, u_hat: &mut [Complex64]) {
        let n = self.n;
        u_hat[0].im = 0.0;
        u_hat[n / 2].im = 0.0;
        for j in 1..n / 2 {
            let avg = (u_hat[j] + u_hat[n - j].conj()) * 0.5;
            u_hat[j] = avg;
            u_hat[n - j] = avg.conj();
        }
    }

    fn blown_up(&self, u_hat: &[Complex64]) -> bool {
        let lim = BLOW_UP * self.n as f64;
        u_hat.iter().any(|c| !(c.norm() <= lim))
    }

    /// Integrates from `u0` (values at `2πj/n`) to `t_final`.
    pub fn run(&self, u0: &[f64], t_final: f64, integrator: Integrator) -> Result<KsRun> {
        match integrator {
            Integrator::Auto => match self.run(u0, t_final, Integrator::Rk4) {
                Err(Error::BlowUp { .. }) => self.run(u0, t_final, Integrator::IfRk4),
                other => other,
            },
            scheme => self.integrate(u0, t_final, scheme),
        }
    }

    fn integrate(&self, u0: &[f64], t_final: f64, scheme: Integrator) -> Result<KsRun> {
        assert_eq!(u0.len(), self.n, "initial field length");
        let start = Instant::now();
        let n = self.n;
        let steps = (t_final / self.dt).round() as usize;
        let h = self.dt;
        let mut u: Vec<Complex64> = u0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd_n.process(&mut u);
        let zero = Complex64::new(0.0, 0.0);
        let mut buf = vec![zero; self.pad];
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
        let e: Vec<f64> = self.linear.iter().map(|l| (l * h).exp()).collect();
        let e2: Vec<f64> = self.linear.iter().map(|l| (0.5 * l * h).exp()).collect();
        let etd = (scheme == Integrator::EtdRk4).then(|| EtdCoefficients::new(&self.linear, h));
        for step in 0..steps {
            match scheme {
                Integrator::Rk4 => {
                    let rhs = |v: &[Complex64], out: &mut [Complex64], buf: &mut [Complex64]| {
                        self.nonlinear(v, out, buf);
                        for j in 0..n {
                            out[j] += v[j] * self.linear[j];
                        }
                    };
                    rhs(&u, &mut k1, &mut buf);
                    for j in 0..n {
                        tmp[j] = u[j] + k1[j] * (0.5 * h);
                    }
                    rhs(&tmp, &mut k2, &mut buf);
                    for j in 0..n {
                        tmp[j] = u[j] + k2[j] * (0.5 * h);
                    }
                    rhs(&tmp, &mut k3, &mut buf);
                    for j in 0..n {
                        tmp[j] = u[j] + k3[j] * h;
                    }
                    rhs(&tmp, &mut k4, &mut buf);
                    for j in 0..n {
                        u[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
                    }
                }
                Integrator::EtdRk4 => {
                    let c = etd.as_ref().expect("ETD coefficients");
                    self.nonlinear(&u, &mut k1, &mut buf);
                    for j in 0..n {
                        tmp[j] = u[j] * e2[j] + k1[j] * c.q[j];
                    }
                    self.nonlinear(&tmp, &mut k2, &mut buf);
                    let a = tmp.clone();
                    for j in 0..n {
                        tmp[j] = u[j] * e2[j] + k2[j] * c.q[j];
                    }
                    self.nonlinear(&tmp, &mut k3, &mut buf);
                    for j in 0..n {
                        tmp[j] = a[j] * e2[j] + (k3[j] * 2.0 - k1[j]) * c.q[j];
                    }
                    self.nonlinear(&tmp, &mut k4, &mut buf);
                    for j in 0..n {
                        u[j] = u[j] * e[j]
                            + k1[j] * c.f1[j]
                            + (k2[j] + k3[j]) * (2.0 * c.f2[j])
                            + k4[j] * c.f3[j];
                    }
                }
                _ => {
                    // v = e^{−Lt}û, advanced by RK4 and mapped back each step.
                    self.nonlinear(&u, &mut k1, &mut buf);
                    for j in 0..n {
                        tmp[j] = (u[j] + k1[j] * (0.5 * h)) * e2[j];
                    }
                    self.nonlinear(&tmp, &mut k2, &mut buf);
                    for j in 0..n {
                        tmp[j] = u[j] * e2[j] + k2[j] * (0.5 * h);
                    }
                    self.nonlinear(&tmp, &mut k3, &mut buf);
                    for j in 0..n {
                        tmp[j] = u[j] * e[j] + k3[j] * (h * e2[j]);
                    }
                    self.nonlinear(&tmp, &mut k4, &mut buf);
                    for j in 0..n {
                        u[j] = u[j] * e[j]
                            + (k1[j] * e[j] + (k2[j] + k3[j]) * (2.0 * e2[j]) + k4[j]) * (h / 6.0);
                    }
                }
            }
            self.make_real(&mut u);
            if self.blown_up(&u) {
                return Err(Error::BlowUp {
                    alpha: self.alpha,
                    modes: n,
                    time: (step + 1) as f64 * h,
                    integrator: scheme.as_str(),
                });
            }
        }
        self.inv_n.process(&mut u);
        let s = 1.0 / n as f64;
        let imag_max = u.iter().map(|c| (c.im * s).abs()).fold(0.0, f64::max);
        Ok(KsRun {
            field: u.iter().map(|c| c.re * s).collect(),
            imag_max,
            integrator: scheme,
            seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// ETDRK4 weights (Cox and Matthews), evaluated as contour means around
/// `hL` so that they stay accurate where `hL → 0`.
struct EtdCoefficients {
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

impl EtdCoefficients {
    const POINTS: usize = 32;

    fn new(linear: &[f64], h: f64) -> Self {
        let roots: Vec<Complex64> = (1..=Self::POINTS)
            .map(|j| Complex64::from_polar(1.0, PI * (j as f64 - 0.5) / Self::POINTS as f64))
            .collect();
        let mean = |l: f64, f: &dyn Fn(Complex64) -> Complex64| {
            let s: Complex64 = roots.iter().map(|&r| f(Complex64::new(h * l, 0.0) + r)).sum();
            h * s.re / Self::POINTS as f64
        };
        let mut c = Self {
            q: Vec::with_capacity(linear.len()),
            f1: Vec::with_capacity(linear.len()),
            f2: Vec::with_capacity(linear.len()),
            f3: Vec::with_capacity(linear.len()),
        };
        for &l in linear {
            c.q.push(mean(l, &|z| ((z / 2.0).exp() - 1.0) / z));
            c.f1.push(mean(l, &|z| (-4.0 - z + z.exp() * (4.0 - 3.0 * z + z * z)) / z.powi(3)));
            c.f2.push(mean(l, &|z| (2.0 + z + z.exp() * (z - 2.0)) / z.powi(3)));
            c.f3.push(mean(l, &|z| (-4.0 - 3.0 * z - z * z + z.exp() * (4.0 - z)) / z.powi(3)));
        }
        c
    }
}

/// `u(·, T)` on the `modes`-point grid of `[0, 2π)`.
pub fn ks_solve(alpha: f64, modes: usize, cfg: &KsConfig) -> Result<KsRun> {
    let u0: Vec<f64> = (0..modes)
        .map(|j| cfg.initial_condition(2.0 * PI * j as f64 / modes as f64))
        .collect();
    KsSolver::with_mean_mode(alpha, modes, cfg.dt, cfg.remove_mean).run(&u0, cfg.t_final, cfg.integrator)
}

/// Trigonometric interpolant of periodic samples `u` (on `2πj/n`) evaluated
/// on `n_out ≥ n` equispaced nodes; the Nyquist coefficient is split evenly.
pub fn trig_interpolate(u: &[f64], n_out: usize) -> Vec<f64> {
    let n = u.len();
    assert!(n_out >= n, "trigonometric interpolation only refines");
    let mut planner = FftPlanner::new();
    let mut c: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut c);
    let mut out = vec![Complex64::new(0.0, 0.0); n_out];
    let half = n / 2;
    for j in 0..n {
        if n % 2 == 0 && j == half {
            if n_out == n {
                out[half] = c[half];
            } else {
                out[half] += c[half] * 0.5;
                out[n_out - half] += c[half] * 0.5;
            }
        } else if j < half || (n % 2 == 1 && j == half) {
            out[j] = c[j];
        } else {
            out[n_out - (n - j)] = c[j];
        }
    }
    planner.plan_fft_inverse(n_out).process(&mut out);
    out.iter().map(|z| z.re / n as f64).collect()
}

/// Appends the value at `2π` (equal to the one at `0`).
pub fn close_periodic(u: &[f64]) -> Vec<f64> {
    let mut v = u.to_vec();
    v.push(u[0]);
    v
}

/// Closed grid on `[0, 2π]` with `modes + 1` nodes.
pub fn ks_grid(modes: usize) -> Grid {
    Grid::uniform(&[(0.0, 2.0 * PI)], &[modes + 1]).expect("valid KS grid")
}

/// Node indices of `x_j = 12π/256 + 56π/256·j`, `j = 0..8`, on the
/// `modes`-point grid (`modes` a multiple of 256).
pub fn observation_indices(modes: usize) -> Vec<usize> {
    let r = modes / 256;
    (0..9).map(|j| r * (6 + 28 * j)).collect()
}

/// Reference solution at `α_exact` on the closed high-fidelity grid.
pub fn ks_reference(cfg: &KsConfig) -> Result<(Grid, Vec<f64>, KsRun)> {
    let run = ks_solve(cfg.alpha_exact, cfg.modes_high, cfg)?;
    Ok((ks_grid(cfg.modes_high), close_periodic(&run.field), run))
}

/// The paper's nine observations of the reference field.
pub fn ks_observations(cfg: &KsConfig, reference: &[f64]) -> Result<Observations> {
    let grid = ks_grid(cfg.modes_high);
    let idx = observation_indices(cfg.modes_high);
    if cfg.modes_high % 256 != 0 {
        return Err(Error::Config("KS observations need modes_high divisible by 256".into()));
    }
    Ok(Observations::new(
        idx.iter().map(|&i| grid.point(i)).collect(),
        idx.iter().map(|&i| reference[i]).collect(),
    )?)
}

/// Both ensembles on the closed high-fidelity grid, with per-run timings.
#[derive(Clone, Debug)]
pub struct KsEnsembles {
    pub high: Ensemble,
    pub low: Ensemble,
    pub alphas: Vec<f64>,
    pub high_seconds: Vec<f64>,
    pub low_seconds: Vec<f64>,
    /// Integrators actually used (after any fallback).
    pub integrators: Vec<Integrator>,
}

/// Integrates one fidelity for every α in parallel.
pub fn ks_ensemble(
    cfg: &KsConfig,
    alphas: &[f64],
    fidelity: Fidelity,
) -> Result<(Ensemble, Vec<f64>, Vec<Integrator>)> {
    let modes = match fidelity {
        Fidelity::Low => cfg.modes_low,
        _ => cfg.modes_high,
    };
    let runs: Vec<KsRun> = alphas
        .par_iter()
        .map(|&a| ks_solve(a, modes, cfg))
        .collect::<Result<_>>()?;
    let members = runs
        .iter()
        .map(|r| match r.field.len() == cfg.modes_high {
            true => close_periodic(&r.field),
            false => close_periodic(&trig_interpolate(&r.field, cfg.modes_high)),
        })
        .collect();
    let e = Ensemble::new(
        ks_grid(cfg.modes_high),
        members,
        alphas.iter().map(|&a| vec![a]).collect(),
        fidelity,
    )?;
    Ok((
        e,
        runs.iter().map(|r| r.seconds).collect(),
        runs.iter().map(|r| r.integrator).collect(),
    ))
}

/// High and low ensembles sharing one set of α samples.
pub fn ks_ensembles(cfg: &KsConfig, seed: u64) -> Result<KsEnsembles> {
    cfg.validate()?;
    let alphas = cfg.alphas(seed);
    let (high, high_seconds, mut integrators) = ks_ensemble(cfg, &alphas, Fidelity::High)?;
    let (low, low_seconds, li) = ks_ensemble(cfg, &alphas, Fidelity::Low)?;
    integrators.extend(li);
    integrators.sort_by_key(|i| i.as_str());
    integrators.dedup();
    Ok(KsEnsembles {
        high,
        low,
        alphas,
        high_seconds,
        low_seconds,
        integrators,
    })
}
