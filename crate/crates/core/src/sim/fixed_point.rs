use alloc::vec::Vec;

use super::{compute_cbr, Scenario};
use crate::bounds::AppRequirement;
use crate::controllers::{mh, Controller};
use crate::error::{Error, Result};
use crate::footprint::TxConfig;
use crate::models::Models;

/// Runs independent per-index jobs; lets callers plug in a thread pool.
pub trait Executor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Per-vehicle configuration step of the fixed point. `previous` is the
/// vehicle's configuration from the last iteration, if any.
pub trait Configure: Sync {
    fn configure(
        &self,
        apps: &[AppRequirement],
        cbr: f64,
        models: &Models,
        previous: Option<&TxConfig>,
    ) -> Result<TxConfig>;
}

impl Configure for Controller {
    fn configure(
        &self,
        apps: &[AppRequirement],
        cbr: f64,
        models: &Models,
        previous: Option<&TxConfig>,
    ) -> Result<TxConfig> {
        match (self, previous) {
            (Controller::Merlin(opts), Some(prev)) => crate::controllers::merlin_warm(apps, cbr, models, opts, prev),
            _ => Controller::configure(self, apps, cbr, models),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOptions {
    /// β: weight of the newly computed CBR in each update.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-3,
            max_iter: 50,
        }
    }
}

impl FixedPointOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "tolerance and iteration limit must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub converged: bool,
    pub iterations: usize,
    /// Largest per-vehicle CBR change of the last iteration.
    pub max_change: f64,
    /// Vehicles whose controller failed in the last iteration and which fell
    /// back to the fixed-power baseline at maximum power.
    pub infeasible_vehicles: usize,
}

/// Alternates between configuring every vehicle at its local CBR and
/// recomputing the CBR the configurations cause, with damped updates
/// `C ← (1 − β)·C + β·C_new`, until no vehicle's CBR moves by `tol` or more.
///
/// Vehicles start from the `local_cbr` stored in the scenario. A vehicle
/// whose requirements the controller cannot meet sends with the fixed-power
/// baseline at maximum power instead; the report counts them.
pub fn fixed_point_run<C: Configure + ?Sized, E: Executor>(
    scenario: &mut Scenario,
    controller: &C,
    models: &Models,
    opts: &FixedPointOptions,
    executor: &E,
) -> Result<FixedPointReport> {
    opts.validate()?;
    let p_max = models.phy().p_max_dbm;
    let mut report = FixedPointReport {
        converged: false,
        iterations: 0,
        max_change: f64::INFINITY,
        infeasible_vehicles: 0,
    };
    let mut first = true;
    while report.iterations < opts.max_iter {
        report.iterations += 1;
        let vehicles = &scenario.vehicles;
        let configs = executor.map(vehicles.len(), |i| {
            let v = &vehicles[i];
            let previous = (!first).then_some(&v.tx_config);
            match controller.configure(&v.apps, v.local_cbr, models, previous) {
                Ok(cfg) => Ok((cfg, false)),
                Err(_) => mh(&v.apps, p_max).map(|cfg| (cfg, true)),
            }
        });
        first = false;
        report.infeasible_vehicles = 0;
        for (v, cfg) in scenario.vehicles.iter_mut().zip(configs) {
            let (cfg, fell_back) = cfg?;
            report.infeasible_vehicles += usize::from(fell_back);
            v.tx_config = cfg;
        }
        let sensed = compute_cbr(scenario, &models.psr, models.t_pkt);
        let mut max_change: f64 = 0.0;
        for (v, new) in scenario.vehicles.iter_mut().zip(sensed) {
            let next = ((1.0 - opts.damping) * v.local_cbr + opts.damping * new).clamp(0.0, 1.0);
            max_change = max_change.max(libm::fabs(next - v.local_cbr));
            v.local_cbr = next;
        }
        report.max_change = max_change;
        if max_change < opts.tol {
            report.converged = true;
            break;
        }
    }
    Ok(report)
}
