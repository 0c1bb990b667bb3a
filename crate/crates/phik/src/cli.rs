//! Command line: `simulate`, `fit`, `active` and `bounds`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phik_core::active::ActiveStep;
use phik_core::ensemble::{Ensemble, Fidelity};
use phik_core::gp::Observations;
use phik_core::methods::Method;
use serde::Serialize;

use crate::config::{Config, FidelityChoice};
use crate::experiment::{self, Bifidelity, FitOutcome, Problem, Simulated};
use crate::io::{self, BoundReportJson, RunManifest, Timing};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "phik", version, about = "Physics-informed multifidelity Gaussian process regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an ensemble and write it as a directory of member CSVs.
    Simulate(SimulateArgs),
    /// Fit one method and write the posterior, metrics and bound report.
    Fit(FitArgs),
    /// Run greedy maximum-variance acquisition and write the error history.
    Active(ActiveArgs),
    /// Evaluate the error-bound constants and inequalities.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Preset name (branin-paper, ks-paper) or path to a TOML config.
    #[arg(long)]
    pub config: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Ensemble size override.
    #[arg(long)]
    pub members: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub m_high: Option<usize>,
    /// Relative stopping threshold of the snapshot selection.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Observation CSV (coordinates, value); defaults to the problem's sites.
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// High-fidelity ensemble directory; simulated when absent.
    #[arg(long)]
    pub high: Option<PathBuf>,
    /// Low-fidelity ensemble directory; simulated when absent.
    #[arg(long)]
    pub low: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FidelityArg {
    High,
    Low,
    Both,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub fidelity: Option<FidelityArg>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// kriging, phik, cophik, biphik or cobiphik.
    #[arg(long)]
    pub method: String,
    /// Reference field CSV on the problem grid; defaults to the built-in one.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ActiveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// A method name or `all`.
    #[arg(long, default_value = "all")]
    pub method: String,
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Bifidelity ensemble directory; built from the low ensemble when absent.
    #[arg(long)]
    pub bifi: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method> {
    s.parse().map_err(|_| {
        Error::Config(format!(
            "unknown method '{s}' (expected kriging, phik, cophik, biphik or cobiphik)"
        ))
    })
}

fn load_config(common: &CommonArgs, model: Option<&ModelArgs>) -> Result<Config> {
    let mut cfg = Config::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = common.members {
        cfg.set_members(m);
    }
    if let Some(m) = model {
        if m.m_high.is_some() {
            cfg.run.m_high = m.m_high;
        }
        if let Some(t) = m.threshold {
            cfg.run.threshold = t;
        }
        if let Some(r) = m.ridge {
            cfg.run.ridge = r;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_simulated(dir: &Path) -> Result<Simulated> {
    let (ensemble, manifest) = io::read_ensemble(dir)?;
    let timing: Option<Timing> = io::read_json(&dir.join(io::TIMING)).ok();
    let cost_per_run = timing
        .and_then(|t| match ensemble.fidelity() {
            Fidelity::Low => t.low_cost,
            _ => t.high_cost,
        })
        .unwrap_or(f64::NAN);
    Ok(Simulated {
        ensemble,
        cost_per_run,
        integrators: manifest.integrators,
    })
}

fn problem(cfg: &Config, model: &ModelArgs) -> Result<Problem> {
    let high = match &model.high {
        Some(d) => load_simulated(d)?,
        None => experiment::simulate(cfg, Fidelity::High)?,
    };
    let low = match &model.low {
        Some(d) => load_simulated(d)?,
        None => experiment::simulate(cfg, Fidelity::Low)?,
    };
    Problem::from_parts(cfg, high, low)
}

fn observations(p: &Problem, model: &ModelArgs) -> Result<Observations> {
    match &model.observations {
        Some(path) => io::read_observations(path),
        None => Ok(p.observations.clone()),
    }
}

#[derive(Serialize)]
struct SelectionJson {
    schema_version: u32,
    m_high: usize,
    threshold: f64,
    pivots: Vec<usize>,
    residual_diag: Vec<f64>,
    rank_exhausted: bool,
}

fn write_selection(dir: &Path, b: &Bifidelity, threshold: f64) -> Result<String> {
    let chol = b.selection.pivoted_cholesky();
    let name = "selection.json".to_string();
    io::write_json(
        &dir.join(&name),
        &SelectionJson {
            schema_version: io::SCHEMA_VERSION,
            m_high: b.selection.requested(),
            threshold,
            pivots: b.selection.gamma_indices().to_vec(),
            residual_diag: chol.residual_diag().to_vec(),
            rank_exhausted: b.selection.rank_exhausted(),
        },
    )?;
    Ok(name)
}

fn timing(p: &Problem, b: Option<&Bifidelity>, start: Instant) -> Timing {
    Timing {
        high_cost: io::finite(p.high_cost),
        low_cost: io::finite(p.low_cost),
        high_runs: p.high.len(),
        low_runs: p.low.len(),
        bifidelity_overhead: b.map(|b| b.cost.overhead),
        predicted_ratio: b.and_then(|b| io::finite(b.cost.predicted_ratio())),
        measured_ratio: b.and_then(|b| io::finite(b.cost.measured_ratio())),
        total_seconds: start.elapsed().as_secs_f64(),
    }
}

#[derive(Serialize)]
struct FitMetrics {
    schema_version: u32,
    problem: String,
    method: String,
    n_observations: usize,
    rel_l2: Option<f64>,
    rho: Option<f64>,
    mu_d: Option<f64>,
    member: Option<usize>,
    ridge: f64,
    m_high: Option<usize>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let mut cfg = load_config(&args.common, None)?;
    if let Some(f) = args.fidelity {
        cfg.run.fidelity = match f {
            FidelityArg::High => FidelityChoice::High,
            FidelityArg::Low => FidelityChoice::Low,
            FidelityArg::Both => FidelityChoice::Both,
        };
    }
    let out = &args.common.out;
    let hash = cfg.hash();
    let problem = cfg.problem.as_str();
    let write = |dir: &Path, f: Fidelity| -> Result<f64> {
        let s = experiment::simulate(&cfg, f)?;
        io::write_ensemble(dir, &s.ensemble, problem, cfg.seed, &hash, &s.integrators)?;
        Ok(s.cost_per_run)
    };
    let mut t = Timing::default();
    let mut record = |f: Fidelity, cost: f64| match f {
        Fidelity::Low => {
            t.low_cost = io::finite(cost);
            t.low_runs = cfg.members();
        }
        _ => {
            t.high_cost = io::finite(cost);
            t.high_runs = cfg.members();
        }
    };
    let dirs: Vec<(PathBuf, Fidelity)> = match cfg.run.fidelity {
        FidelityChoice::High => vec![(out.clone(), Fidelity::High)],
        FidelityChoice::Low => vec![(out.clone(), Fidelity::Low)],
        FidelityChoice::Both => vec![(out.join("high"), Fidelity::High), (out.join("low"), Fidelity::Low)],
    };
    for (dir, f) in &dirs {
        let cost = write(dir, *f)?;
        record(*f, cost);
    }
    t.total_seconds = start.elapsed().as_secs_f64();
    for (dir, _) in &dirs {
        io::write_json(&dir.join(io::TIMING), &t)?;
    }
    Ok(())
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = load_config(&args.common, Some(&args.model))?;
    let method = parse_method(&args.method)?;
    let mut p = problem(&cfg, &args.model)?;
    let has_truth = args.truth.is_some() || args.model.observations.is_none();
    if let Some(path) = &args.truth {
        let (_, cols) = io::read_field_csv(path, &p.grid)?;
        p.truth = cols.into_iter().next().unwrap_or_default();
    }
    let obs = observations(&p, &args.model)?;
    let bifi = if method.is_bifidelity() {
        Some(experiment::build_bifidelity(&p, &cfg)?)
    } else {
        None
    };
    let outcome: FitOutcome = experiment::fit(method, &p, bifi.as_ref(), &obs, &cfg)?;
    let out = io::ensure_dir(&args.common.out)?;
    let mut files = Vec::new();
    let std = outcome.posterior.std_dev();
    io::write_field_csv(
        &out.join("posterior.csv"),
        &p.grid,
        &[("mean", &outcome.posterior.mean), ("std", &std), ("truth", &p.truth)],
    )?;
    files.push("posterior.csv".to_string());
    let (rho, mu_d, member) = match &outcome.cophik {
        Some(f) => (Some(f.model.rho), Some(f.model.delta.mean), Some(f.member)),
        None => (None, None, None),
    };
    io::write_json(
        &out.join("metrics.json"),
        &FitMetrics {
            schema_version: io::SCHEMA_VERSION,
            problem: cfg.problem.as_str().into(),
            method: method.as_str().into(),
            n_observations: obs.len(),
            rel_l2: if has_truth { io::finite(outcome.relative_error) } else { None },
            rho,
            mu_d,
            member,
            ridge: cfg.run.ridge,
            m_high: bifi.as_ref().map(|b| b.selection.gamma_indices().len()),
        },
    )?;
    files.push("metrics.json".into());
    if let Some(b) = &bifi {
        files.push(write_selection(&out, b, cfg.run.threshold)?);
        let cobiphik = outcome.cophik.as_ref().filter(|_| method == Method::CoBiPhik);
        let report = experiment::bounds(&p, &b.bifi, &obs, cobiphik, &cfg)?;
        io::write_json(&out.join("bounds.json"), &BoundReportJson::from(&report))?;
        files.push("bounds.json".into());
    }
    io::write_json(&out.join(io::TIMING), &timing(&p, bifi.as_ref(), start))?;
    RunManifest::write(&out, "fit", cfg.problem.as_str(), cfg.seed, &cfg.hash(), p.integrators.clone(), &files)?;
    Ok(())
}

/// One row per fit with the point whose acquisition led to it (empty for
/// the initial design).
pub fn write_history(path: &Path, dim: usize, runs: &[(Method, Vec<ActiveStep>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Inputs(format!("{}: {e}", path.display())))?;
    let mut header = vec!["step".to_string(), "method".into(), "n_obs".into()];
    header.extend(io::coord_names(dim));
    header.push("rel_error".into());
    let err = |e: csv::Error| Error::Inputs(format!("{}: {e}", path.display()));
    w.write_record(&header).map_err(err)?;
    for (method, steps) in runs {
        for (k, s) in steps.iter().enumerate() {
            let mut row = vec![k.to_string(), method.as_str().to_string(), s.observations.len().to_string()];
            let acquired = if k == 0 { None } else { steps[k - 1].acquired.as_ref() };
            match acquired {
                Some((_, x)) => row.extend(x.iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat(String::new()).take(dim)),
            }
            row.push(s.relative_error.to_string());
            w.write_record(&row).map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ActiveMetrics {
    schema_version: u32,
    problem: String,
    n_initial: usize,
    n_max: usize,
    final_errors: Vec<(String, Option<f64>)>,
}

pub fn cmd_active(args: &ActiveArgs) -> Result<()> {
    let start = Instant::now();
    let mut cfg = load_config(&args.common, Some(&args.model))?;
    if let Some(n) = args.n_max {
        cfg.run.n_max = n;
    }
    let methods: Vec<Method> = if args.method.eq_ignore_ascii_case("all") {
        Method::ALL.to_vec()
    } else {
        vec![parse_method(&args.method)?]
    };
    let p = problem(&cfg, &args.model)?;
    let obs = observations(&p, &args.model)?;
    let bifi = if methods.iter().any(|m| m.is_bifidelity()) {
        Some(experiment::build_bifidelity(&p, &cfg)?)
    } else {
        None
    };
    let mut runs = Vec::new();
    for &m in &methods {
        let steps = experiment::active(m, &p, bifi.as_ref(), obs.clone(), cfg.run.n_max, &cfg)?;
        runs.push((m, steps));
    }
    let out = io::ensure_dir(&args.common.out)?;
    write_history(&out.join("history.csv"), p.grid.dim(), &runs)?;
    io::write_json(
        &out.join("metrics.json"),
        &ActiveMetrics {
            schema_version: io::SCHEMA_VERSION,
            problem: cfg.problem.as_str().into(),
            n_initial: obs.len(),
            n_max: cfg.run.n_max,
            final_errors: runs
                .iter()
                .map(|(m, s)| (m.as_str().to_string(), s.last().and_then(|s| io::finite(s.relative_error))))
                .collect(),
        },
    )?;
    io::write_json(&out.join(io::TIMING), &timing(&p, bifi.as_ref(), start))?;
    let files = vec!["history.csv".to_string(), "metrics.json".to_string()];
    RunManifest::write(&out, "active", cfg.problem.as_str(), cfg.seed, &cfg.hash(), p.integrators.clone(), &files)?;
    Ok(())
}

pub fn cmd_bounds(args: &BoundsArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = load_config(&args.common, Some(&args.model))?;
    let p = problem(&cfg, &args.model)?;
    let obs = observations(&p, &args.model)?;
    let (bifi_ens, built): (Ensemble, Option<Bifidelity>) = match &args.bifi {
        Some(dir) => (io::read_ensemble(dir)?.0, None),
        None => {
            let b = experiment::build_bifidelity(&p, &cfg)?;
            (b.bifi.clone(), Some(b))
        }
    };
    let report = experiment::bounds(&p, &bifi_ens, &obs, None, &cfg)?;
    let out = io::ensure_dir(&args.common.out)?;
    io::write_json(&out.join("bounds.json"), &BoundReportJson::from(&report))?;
    let mut files = vec!["bounds.json".to_string()];
    if let Some(b) = &built {
        files.push(write_selection(&out, b, cfg.run.threshold)?);
    }
    io::write_json(&out.join(io::TIMING), &timing(&p, built.as_ref(), start))?;
    RunManifest::write(&out, "bounds", cfg.problem.as_str(), cfg.seed, &cfg.hash(), p.integrators.clone(), &files)?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Active(a) => cmd_active(a),
        Command::Bounds(a) => cmd_bounds(a),
    }
}
