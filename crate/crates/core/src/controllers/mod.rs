//! Parameter selection: given an application set and the experienced channel
//! load, choose the `(power, rate)` pairs a vehicle transmits with.
//!
//! - [`mh`]: fixed power, rate equal to the largest required rate.
//! - [`presto`]: per-application exhaustive grid search, then a power-sorted
//!   combination that reuses packets sent at higher powers.
//! - [`merlin`]: the continuous constrained problem solved by multi-start SQP.
//! - [`brute_force_oracle`]: exhaustive multi-entry search on a coarse grid.

mod merlin;
mod oracle;
mod presto;
mod qp;
mod sqp;

pub use merlin::{merlin, merlin_warm, MerlinOptions};
pub use oracle::{brute_force_oracle, ORACLE_SEARCH_LIMIT};
pub use presto::{presto, presto_combine, presto_per_app};

use alloc::format;
use alloc::vec;

use crate::bounds::AppRequirement;
use crate::error::{Error, Result};
use crate::footprint::{TxConfig, TxEntry};
use crate::models::Models;

/// Discrete search grid: rates `k·ΔT` for `k < n_t`, powers `P_min + k·ΔP`
/// for `k < n_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGrid {
    pub delta_t: f64,
    pub delta_p: f64,
    pub t_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_t: usize,
    pub n_p: usize,
}

impl ControllerGrid {
    pub fn new(delta_t: f64, delta_p: f64, t_max: f64, p_min: f64, p_max: f64) -> Result<Self> {
        if !(delta_t > 0.0 && delta_p > 0.0 && t_max > 0.0 && p_max > p_min) {
            return Err(Error::InvalidGrid("grid steps and ranges must be positive".into()));
        }
        let steps = |span: f64, step: f64, what: &str| -> Result<usize> {
            let k = span / step;
            let r = libm::round(k);
            if (k - r).abs() > 1e-9 * r.max(1.0) {
                return Err(Error::InvalidGrid(format!("{what} step {step} does not divide {span}")));
            }
            Ok(r as usize + 1)
        };
        Ok(Self {
            delta_t,
            delta_p,
            t_max,
            p_min,
            p_max,
            n_t: steps(t_max, delta_t, "rate")?,
            n_p: steps(p_max - p_min, delta_p, "power")?,
        })
    }

    /// ΔT = 0.1 Hz up to 20 Hz, ΔP = 0.5 dB over [0, 25] dBm.
    pub fn table1() -> Self {
        Self::new(0.1, 0.5, 20.0, 0.0, 25.0).expect("static grid is valid")
    }

    #[inline]
    pub fn rate(&self, k_t: usize) -> f64 {
        k_t as f64 * self.delta_t
    }

    #[inline]
    pub fn power(&self, k_p: usize) -> f64 {
        self.p_min + k_p as f64 * self.delta_p
    }
}

impl Default for ControllerGrid {
    fn default() -> Self {
        Self::table1()
    }
}

/// Fixed power, rate = largest required rate.
pub fn mh(apps: &[AppRequirement], fixed_power_dbm: f64) -> Result<TxConfig> {
    let rate = apps
        .iter()
        .map(|a| a.rate_hz)
        .reduce(f64::max)
        .ok_or(Error::NoApplications)?;
    Ok(TxConfig::new(vec![TxEntry::new(fixed_power_dbm, rate)]))
}

/// A configured controller, as used by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Mh { fixed_power_dbm: f64 },
    Presto { grid: ControllerGrid, drop_idle: bool },
    Merlin(MerlinOptions),
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Mh { .. } => "mh",
            Controller::Presto { .. } => "presto",
            Controller::Merlin(_) => "merlin",
        }
    }

    pub fn configure(&self, apps: &[AppRequirement], cbr: f64, models: &Models) -> Result<TxConfig> {
        match self {
            Controller::Mh { fixed_power_dbm } => mh(apps, *fixed_power_dbm),
            Controller::Presto { grid, drop_idle } => {
                let cfg = presto(apps, cbr, models, grid)?;
                Ok(if *drop_idle { cfg.without_idle_entries() } else { cfg })
            }
            Controller::Merlin(opts) => merlin(apps, cbr, models, opts),
        }
    }
}
