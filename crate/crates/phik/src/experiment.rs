//! End-to-end pipelines: ensembles, bifidelity construction, fits, active
//! learning and bound verification for the built-in problems.

use std::time::Instant;

use phik_core::active::{relative_error, run_active_loop, ActiveStep};
use phik_core::bifidelity::{build_bifidelity_ensemble, select_subset, BifidelitySelection, CostModel, InnerProduct};
use phik_core::bounds::{full_report, BoundReport, LinearConstraint};
use phik_core::cokriging::RhoGrid;
use phik_core::cophik::{fit_cophik, CoPhikFit};
use phik_core::ensemble::{Ensemble, Fidelity};
use phik_core::gp::{HyperSearchConfig, Observations, Posterior};
use phik_core::grid::Grid;
use phik_core::methods::{Method, MethodSetup, Regressor};

use crate::config::{Config, InnerProductKind, ProblemKind};
use crate::models::branin::{branin_observations, branin_stochastic_ensemble, branin_truth};
use crate::models::ks::{ks_ensemble, ks_observations, ks_reference};
use crate::{Error, Result};

/// Everything a fit needs: reference field, observations and both
/// ensembles, with the wall-clock cost of producing them.
#[derive(Clone, Debug)]
pub struct Problem {
    pub kind: ProblemKind,
    pub grid: Grid,
    pub truth: Vec<f64>,
    pub observations: Observations,
    pub high: Ensemble,
    pub low: Ensemble,
    /// Mean seconds per high and low run.
    pub high_cost: f64,
    pub low_cost: f64,
    pub integrators: Vec<String>,
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t = Instant::now();
    let v = f()?;
    Ok((v, t.elapsed().as_secs_f64()))
}

/// Reference field and observations only (no ensembles).
pub fn reference(cfg: &Config) -> Result<(Grid, Vec<f64>, Observations, Vec<String>)> {
    match cfg.problem {
        ProblemKind::Branin => {
            let (grid, truth) = branin_truth(&cfg.branin);
            Ok((grid, truth, branin_observations(&cfg.branin)?, Vec::new()))
        }
        ProblemKind::Ks => {
            let (grid, truth, run) = ks_reference(&cfg.ks)?;
            let obs = ks_observations(&cfg.ks, &truth)?;
            Ok((grid, truth, obs, vec![run.integrator.as_str().to_string()]))
        }
    }
}

/// One simulated ensemble with its mean cost per run.
#[derive(Clone, Debug)]
pub struct Simulated {
    pub ensemble: Ensemble,
    pub cost_per_run: f64,
    pub integrators: Vec<String>,
}

/// Simulates one fidelity of the configured problem (high fidelity on the
/// problem grid, low fidelity on its own grid for Branin and lifted to the
/// high grid for KS).
pub fn simulate(cfg: &Config, fidelity: Fidelity) -> Result<Simulated> {
    cfg.validate()?;
    match cfg.problem {
        ProblemKind::Branin => {
            let (ensemble, secs) = timed(|| branin_stochastic_ensemble(&cfg.branin, fidelity, cfg.seed))?;
            Ok(Simulated {
                cost_per_run: secs / ensemble.len() as f64,
                ensemble,
                integrators: Vec::new(),
            })
        }
        ProblemKind::Ks => {
            let alphas = cfg.ks.alphas(cfg.seed);
            let (ensemble, secs, used) = ks_ensemble(&cfg.ks, &alphas, fidelity)?;
            let mut integrators: Vec<String> = used.iter().map(|i| i.as_str().to_string()).collect();
            integrators.sort();
            integrators.dedup();
            Ok(Simulated {
                cost_per_run: secs.iter().sum::<f64>() / secs.len() as f64,
                ensemble,
                integrators,
            })
        }
    }
}

impl Problem {
    /// Assembles a problem from given ensembles and per-run costs.
    pub fn from_parts(cfg: &Config, high: Simulated, low: Simulated) -> Result<Self> {
        let (grid, truth, observations, mut integrators) = reference(cfg)?;
        if high.ensemble.grid() != &grid {
            return Err(Error::Inputs("high-fidelity ensemble is not on the problem grid".into()));
        }
        if high.ensemble.len() != low.ensemble.len() {
            return Err(Error::Inputs(format!(
                "high and low ensembles differ in size ({} vs {})",
                high.ensemble.len(),
                low.ensemble.len()
            )));
        }
        integrators.extend(high.integrators);
        integrators.extend(low.integrators);
        integrators.sort();
        integrators.dedup();
        Ok(Self {
            kind: cfg.problem,
            grid,
            truth,
            observations,
            high: high.ensemble,
            low: low.ensemble,
            high_cost: high.cost_per_run,
            low_cost: low.cost_per_run,
            integrators,
        })
    }
}

/// Simulates both ensembles for the configured problem.
pub fn build_problem(cfg: &Config) -> Result<Problem> {
    let high = simulate(cfg, Fidelity::High)?;
    let low = simulate(cfg, Fidelity::Low)?;
    Problem::from_parts(cfg, high, low)
}

pub fn inner_product(cfg: &Config, grid: &Grid) -> InnerProduct {
    match cfg.run.inner_product {
        InnerProductKind::Euclidean => InnerProduct::euclidean(),
        InnerProductKind::CellMeasure => InnerProduct::cell_measure(grid),
    }
}

/// `u_B(Γ)` with its selection and cost accounting.
#[derive(Clone, Debug)]
pub struct Bifidelity {
    pub selection: BifidelitySelection,
    pub high_gamma: Ensemble,
    pub bifi: Ensemble,
    pub cost: CostModel,
}

/// Selects `γ` on the low-fidelity ensemble, takes the high-fidelity runs
/// for `γ` from `problem.high` and lifts every low-fidelity member.
pub fn build_bifidelity(problem: &Problem, cfg: &Config) -> Result<Bifidelity> {
    let ip = inner_product(cfg, problem.low.grid());
    let start = Instant::now();
    let selection = select_subset(&problem.low, &ip, cfg.m_high(), cfg.run.threshold)?;
    let high_gamma = problem.high.subset(selection.gamma_indices());
    let bifi = build_bifidelity_ensemble(&problem.low, &high_gamma, &selection, &ip)?;
    bifi.statistics()?;
    let overhead = start.elapsed().as_secs_f64();
    let cost = CostModel {
        low_cost: problem.low_cost,
        high_cost: problem.high_cost,
        m_low: problem.low.len(),
        m_high: selection.gamma_indices().len(),
        overhead,
    };
    Ok(Bifidelity {
        selection,
        high_gamma,
        bifi,
        cost,
    })
}

pub fn search_config(grid: &Grid, cfg: &Config) -> HyperSearchConfig {
    HyperSearchConfig {
        restarts: cfg.run.restarts,
        max_evals: cfg.run.max_evals,
        seed: cfg.seed,
        domain: Some(grid.axes().iter().map(|a| (a.start, a.end())).collect()),
        ..HyperSearchConfig::default()
    }
}

pub fn method_setup<'a>(
    method: Method,
    problem: &'a Problem,
    bifi: Option<&'a Bifidelity>,
    cfg: &Config,
) -> Result<MethodSetup<'a>> {
    let mut setup = MethodSetup::new(method)
        .with_high(&problem.high)
        .with_search(search_config(&problem.grid, cfg))
        .with_ridge(cfg.run.ridge);
    if method.is_bifidelity() {
        let b = bifi.ok_or_else(|| Error::Inputs(format!("{method} needs the bifidelity ensemble")))?;
        setup = setup.with_bifi(&b.bifi);
    }
    Ok(setup)
}

/// Posterior on the problem grid plus fit details.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub method: Method,
    pub posterior: Posterior,
    pub relative_error: f64,
    /// `(ρ, member)` chosen by CoPhIK-type methods.
    pub cophik: Option<CoPhikFit>,
}

pub fn fit(
    method: Method,
    problem: &Problem,
    bifi: Option<&Bifidelity>,
    obs: &Observations,
    cfg: &Config,
) -> Result<FitOutcome> {
    let setup = method_setup(method, problem, bifi, cfg)?;
    let points = problem.grid.points();
    let (posterior, cophik) = match method {
        Method::CoPhik | Method::CoBiPhik => {
            let f = fit_cophik(setup.ensemble()?, obs, &setup.search, &RhoGrid::default(), setup.ridge)?;
            (f.posterior(&points, setup.ridge)?, Some(f))
        }
        _ => (setup.fit_predict(obs, &points)?, None),
    };
    Ok(FitOutcome {
        method,
        relative_error: relative_error(&posterior.mean, &problem.truth),
        posterior,
        cophik,
    })
}

/// Active learning from `obs` on the problem grid with the reference field
/// as oracle.
pub fn active(
    method: Method,
    problem: &Problem,
    bifi: Option<&Bifidelity>,
    obs: Observations,
    n_max: usize,
    cfg: &Config,
) -> Result<Vec<ActiveStep>> {
    let setup = method_setup(method, problem, bifi, cfg)?;
    let points = problem.grid.points();
    let grid = &problem.grid;
    let truth = &problem.truth;
    let oracle = |x: &[f64]| {
        grid.node_index(x)
            .map(|i| truth[i])
            .ok_or_else(|| format!("{x:?} is not a grid node"))
    };
    Ok(run_active_loop(&setup, obs, oracle, &points, truth, n_max)?)
}

/// The constraint the problem's fields satisfy, if any: periodicity
/// `u(0) = u(2π)` for KS.
pub fn constraint(problem: &Problem) -> Option<LinearConstraint> {
    match problem.kind {
        ProblemKind::Ks => Some(LinearConstraint::periodic(problem.grid.len())),
        ProblemKind::Branin => None,
    }
}

/// Every bound check for PhIK on `u_H(Γ)` against `u_B(Γ)`; with a
/// constraint, also Theorem 3 and (given a CoBiPhIK fit) Theorem 4.
pub fn bounds(
    problem: &Problem,
    bifi: &Ensemble,
    obs: &Observations,
    cobiphik: Option<&CoPhikFit>,
    cfg: &Config,
) -> Result<BoundReport> {
    let ip = inner_product(cfg, &problem.grid);
    let lc = constraint(problem);
    Ok(full_report(
        &problem.high,
        bifi,
        obs,
        &ip,
        cfg.run.ridge,
        lc.as_ref().map(|l| (l, cobiphik)),
    )?)
}
