use alloc::vec::Vec;

use super::ControllerGrid;
use crate::bounds::{AppRequirement, WilsonTerms};
use crate::error::{Error, Result};
use crate::footprint::{entry_footprint, TxConfig, TxEntry};
use crate::models::Models;

/// Per-invocation tables shared by all applications: Wilson factors for every
/// rate PRESTO scans (`ΔT` up to `(N_T − 1)·ΔT`) and the sensing integral of
/// every power.
pub(super) struct SearchTables {
    terms: Vec<WilsonTerms>,
    integrals: Vec<f64>,
}

impl SearchTables {
    pub(super) fn new(grid: &ControllerGrid, models: &Models) -> Self {
        Self {
            terms: (1..grid.n_t)
                .map(|k| WilsonTerms::new(grid.rate(k), &models.wilson))
                .collect(),
            integrals: (0..grid.n_p)
                .map(|k| models.psr.spatial_integral(grid.power(k)))
                .collect(),
        }
    }
}

pub(super) fn search_app(
    app: &AppRequirement,
    cbr: f64,
    models: &Models,
    grid: &ControllerGrid,
    tables: &SearchTables,
) -> Option<(f64, f64)> {
    let mut best = f64::INFINITY;
    let mut saved = None;
    // Powers from P_min + ΔP, rates from ΔT; a candidate replaces the
    // incumbent only with a strictly smaller footprint. The bound grows with
    // the rate and so does the footprint, so at each power only the first
    // feasible rate of the ascending scan can replace the incumbent. The
    // delivery ratio grows with power, so that first rate only moves down as
    // the power rises: walk down from the previous one, bisect otherwise.
    let terms = &tables.terms;
    let mut hint = terms.len();
    for k_p in 1..grid.n_p {
        let power = grid.power(k_p);
        let rho = models.table.lookup(app.cr_m, power, cbr);
        let feasible = |k: usize| terms[k].count(rho) >= app.rate_hz;
        let first = if hint < terms.len() && feasible(hint) {
            let mut k = hint;
            while k > 0 && feasible(k - 1) {
                k -= 1;
            }
            k
        } else {
            terms.partition_point(|term| term.count(rho) < app.rate_hz)
        };
        hint = first;
        let Some(term) = terms.get(first) else {
            continue;
        };
        let fp = entry_footprint(models.t_pkt, term.rate(), tables.integrals[k_p]);
        if fp < best {
            best = fp;
            saved = Some((power, term.rate()));
        }
    }
    saved
}

/// Minimum-footprint `(power, rate)` grid pair that satisfies `app` on its
/// own at load `cbr`.
pub fn presto_per_app(app: &AppRequirement, cbr: f64, models: &Models, grid: &ControllerGrid) -> Result<(f64, f64)> {
    let tables = SearchTables::new(grid, models);
    search_app(app, cbr, models, grid, &tables).ok_or(Error::Infeasible { app: 0 })
}

/// Combines per-application pairs: sorted by decreasing power (ties keep
/// application order), each lower-power entry only adds the rate missing
/// from what higher powers already send. The total emitted rate equals the
/// largest per-application rate.
pub fn presto_combine(per_app: &[(f64, f64)]) -> TxConfig {
    let mut order: Vec<usize> = (0..per_app.len()).collect();
    order.sort_by(|&a, &b| per_app[b].0.total_cmp(&per_app[a].0));

    let mut entries = Vec::with_capacity(per_app.len());
    let mut sent = 0.0;
    for (rank, &j) in order.iter().enumerate() {
        let (power, rate) = per_app[j];
        if rank == 0 {
            entries.push(TxEntry::new(power, rate));
            sent = rate;
        } else if rate > sent {
            let extra = rate - sent;
            entries.push(TxEntry::new(power, extra));
            sent += extra;
        } else {
            entries.push(TxEntry::new(power, 0.0));
        }
    }
    TxConfig::new(entries)
}

/// PRESTO: [`presto_per_app`] for every application, then [`presto_combine`].
pub fn presto(apps: &[AppRequirement], cbr: f64, models: &Models, grid: &ControllerGrid) -> Result<TxConfig> {
    Ok(presto_combine(&presto_pairs(apps, cbr, models, grid)?))
}

/// The per-application pairs PRESTO combines.
pub(super) fn presto_pairs(
    apps: &[AppRequirement],
    cbr: f64,
    models: &Models,
    grid: &ControllerGrid,
) -> Result<Vec<(f64, f64)>> {
    if apps.is_empty() {
        return Err(Error::NoApplications);
    }
    let tables = SearchTables::new(grid, models);
    apps.iter()
        .enumerate()
        .map(|(j, app)| search_app(app, cbr, models, grid, &tables).ok_or(Error::Infeasible { app: j }))
        .collect()
}
