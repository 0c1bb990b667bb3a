//! Run configuration: one TOML document per run, with named presets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::models::branin::BraninConfig;
use crate::models::ks::KsConfig;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Branin,
    Ks,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Branin => "branin",
            ProblemKind::Ks => "ks",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityChoice {
    High,
    Low,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerProductKind {
    Euclidean,
    CellMeasure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Selected high-fidelity runs; defaults to 21 (Branin) or 17 (KS).
    pub m_high: Option<usize>,
    /// Relative stopping threshold of the pivoted Cholesky selection.
    pub threshold: f64,
    pub ridge: f64,
    pub n_max: usize,
    pub fidelity: FidelityChoice,
    pub inner_product: InnerProductKind,
    pub restarts: usize,
    pub max_evals: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m_high: None,
            threshold: 1e-12,
            ridge: 0.0,
            n_max: 16,
            fidelity: FidelityChoice::High,
            inner_product: InnerProductKind::Euclidean,
            restarts: 8,
            max_evals: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub branin: BraninConfig,
    #[serde(default)]
    pub ks: KsConfig,
}

pub const PRESETS: [&str; 2] = ["branin-paper", "ks-paper"];

const BRANIN_PAPER: &str = r#"
problem = "branin"
seed = 7

[run]
m_high = 21
threshold = 1e-12
n_max = 16

[branin]
grid_high = [41, 41]
grid_low = [21, 21]
g_hat = 20.0
members = 300
"#;

const KS_PAPER: &str = r#"
problem = "ks"
seed = 1

[run]
m_high = 17
threshold = 1e-12

[ks]
modes_high = 256
modes_low = 128
dt = 1e-3
t_final = 5.0
alpha_exact = 37.545
alpha_range = [30.0, 36.0]
members = 400
"#;

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Option<Self> {
        let text = match name {
            "branin-paper" => BRANIN_PAPER,
            "ks-paper" => KS_PAPER,
            _ => return None,
        };
        Some(Self::parse(text).expect("presets parse"))
    }

    /// A preset name or a path to a TOML file.
    pub fn load(spec: &str) -> Result<Self> {
        if let Some(cfg) = Self::preset(spec) {
            return Ok(cfg);
        }
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!(
                "cannot read config '{spec}' ({e}); presets are {}",
                PRESETS.join(", ")
            ))
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.branin.validate()?;
        self.ks.validate()?;
        if !(self.run.threshold >= 0.0) || !(self.run.ridge >= 0.0) {
            return Err(Error::Config("threshold and ridge must be non-negative".into()));
        }
        if self.run.m_high == Some(0) {
            return Err(Error::Config("m_high must be positive".into()));
        }
        Ok(())
    }

    pub fn members(&self) -> usize {
        match self.problem {
            ProblemKind::Branin => self.branin.members,
            ProblemKind::Ks => self.ks.members,
        }
    }

    pub fn set_members(&mut self, m: usize) {
        match self.problem {
            ProblemKind::Branin => self.branin.members = m,
            ProblemKind::Ks => self.ks.members = m,
        }
    }

    pub fn m_high(&self) -> usize {
        self.run.m_high.unwrap_or(match self.problem {
            ProblemKind::Branin => 21,
            ProblemKind::Ks => 17,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
