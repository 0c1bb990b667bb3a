//! The five regression methods behind one interface.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::cokriging::RhoGrid;
use crate::cophik::fit_cophik;
use crate::ensemble::Ensemble;
use crate::gp::{fit_ordinary_kriging, posterior, HyperSearchConfig, Observations, Posterior};
use crate::phik::phik_posterior;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Kriging,
    Phik,
    CoPhik,
    BiPhik,
    CoBiPhik,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Kriging,
        Method::Phik,
        Method::CoPhik,
        Method::BiPhik,
        Method::CoBiPhik,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Kriging => "kriging",
            Method::Phik => "phik",
            Method::CoPhik => "cophik",
            Method::BiPhik => "biphik",
            Method::CoBiPhik => "cobiphik",
        }
    }

    /// Uses the bifidelity ensemble rather than the high-fidelity one.
    pub fn is_bifidelity(self) -> bool {
        matches!(self, Method::BiPhik | Method::CoBiPhik)
    }

    pub fn needs_ensemble(self) -> bool {
        self != Method::Kriging
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown method '{s}'")))
    }
}

/// Anything that turns observations into a posterior on query points.
pub trait Regressor {
    fn fit_predict(&self, obs: &Observations, query: &[Vec<f64>]) -> Result<Posterior>;
}

/// A method together with the priors and settings it needs.
#[derive(Clone, Debug)]
pub struct MethodSetup<'a> {
    pub method: Method,
    /// `u_H(Γ)` for PhIK and CoPhIK.
    pub high: Option<&'a Ensemble>,
    /// `u_B(Γ)` for BiPhIK and CoBiPhIK.
    pub bifi: Option<&'a Ensemble>,
    pub search: HyperSearchConfig,
    pub rho_grid: RhoGrid,
    pub ridge: f64,
}

impl<'a> MethodSetup<'a> {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            high: None,
            bifi: None,
            search: HyperSearchConfig::default(),
            rho_grid: RhoGrid::default(),
            ridge: 0.0,
        }
    }

    pub fn with_high(mut self, e: &'a Ensemble) -> Self {
        self.high = Some(e);
        self
    }

    pub fn with_bifi(mut self, e: &'a Ensemble) -> Self {
        self.bifi = Some(e);
        self
    }

    pub fn with_search(mut self, search: HyperSearchConfig) -> Self {
        self.search = search;
        self
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    /// The prior ensemble this method draws on.
    pub fn ensemble(&self) -> Result<&'a Ensemble> {
        let e = if self.method.is_bifidelity() {
            self.bifi
        } else {
            self.high
        };
        e.ok_or_else(|| {
            Error::InvalidArgument(alloc::format!("{} needs an ensemble", self.method))
        })
    }
}

impl Regressor for MethodSetup<'_> {
    fn fit_predict(&self, obs: &Observations, query: &[Vec<f64>]) -> Result<Posterior> {
        match self.method {
            Method::Kriging => {
                let fit = fit_ordinary_kriging(obs, &self.search)?;
                posterior(&fit.model, obs, query, self.ridge)
            }
            Method::Phik | Method::BiPhik => phik_posterior(self.ensemble()?, obs, query, self.ridge),
            Method::CoPhik | Method::CoBiPhik => {
                let fit = fit_cophik(self.ensemble()?, obs, &self.search, &self.rho_grid, self.ridge)?;
                fit.posterior(query, self.ridge)
            }
        }
    }
}

impl<F> Regressor for F
where
    F: Fn(&Observations, &[Vec<f64>]) -> Result<Posterior>,
{
    fn fit_predict(&self, obs: &Observations, query: &[Vec<f64>]) -> Result<Posterior> {
        self(obs, query)
    }
}
