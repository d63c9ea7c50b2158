use alloc::vec;
use alloc::vec::Vec;

use super::presto::presto_pairs;
use super::sqp::{minimize, Nlp, SqpOptions};
use super::{presto_combine, ControllerGrid};
use crate::bounds::{requirements_satisfied, wilson_lower_count, AppRequirement};
use crate::error::{Error, Result};
use crate::footprint::{footprint, TxConfig, TxEntry, TxLimits};
use crate::models::Models;

/// Settings of the continuous controller.
#[derive(Debug, Clone, PartialEq)]
pub struct MerlinOptions {
    /// Number of `(power, rate)` entries; `None` means twice the number of
    /// applications.
    pub n_v: Option<usize>,
    pub t_max_hz: f64,
    /// Cap the summed rate at `t_max_hz` in addition to each entry's rate.
    pub cap_total_rate: bool,
    /// Grid of the PRESTO solution used as a warm start.
    pub warm_start_grid: ControllerGrid,
    /// Starts spread over the power range, in addition to the two PRESTO
    /// starts (combined and per-application).
    pub spread_starts: usize,
    pub max_iter: usize,
}

impl Default for MerlinOptions {
    fn default() -> Self {
        Self {
            n_v: None,
            t_max_hz: 20.0,
            cap_total_rate: true,
            warm_start_grid: ControllerGrid::table1(),
            spread_starts: 4,
            max_iter: 60,
        }
    }
}

/// Variables are `[T_0 … T_{n−1}, P_0 … P_{n−1}]`.
struct FootprintProblem<'a> {
    apps: &'a [AppRequirement],
    cbr: f64,
    models: &'a Models,
    entries: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    linear: Vec<(Vec<f64>, f64)>,
    /// Finite-difference step in power: half a PDR table cell.
    power_step: f64,
}

impl<'a> FootprintProblem<'a> {
    fn new(apps: &'a [AppRequirement], cbr: f64, models: &'a Models, entries: usize, opts: &MerlinOptions) -> Self {
        let phy = models.phy();
        let mut lower = vec![0.0; entries];
        lower.extend(core::iter::repeat_n(phy.p_min_dbm, entries));
        let mut upper = vec![opts.t_max_hz; entries];
        upper.extend(core::iter::repeat_n(phy.p_max_dbm, entries));
        let linear = if opts.cap_total_rate {
            let mut coef = vec![1.0; entries];
            coef.extend(core::iter::repeat_n(0.0, entries));
            vec![(coef, opts.t_max_hz)]
        } else {
            Vec::new()
        };
        let powers = models.table.powers();
        let power_step = if powers.len() > 1 {
            0.5 * (powers[1] - powers[0])
        } else {
            0.25
        };
        Self {
            apps,
            cbr,
            models,
            entries,
            lower,
            upper,
            linear,
            power_step,
        }
    }

    fn rho(&self, app: &AppRequirement, power: f64) -> f64 {
        self.models.table.lookup(app.cr_m, power, self.cbr)
    }

    /// Power pair straddling `p` for a central difference, one-sided at the
    /// box edges.
    fn power_pair(&self, p: f64) -> (f64, f64) {
        let phy = self.models.phy();
        let lo = (p - self.power_step).max(phy.p_min_dbm);
        let hi = (p + self.power_step).min(phy.p_max_dbm);
        (lo, hi)
    }

    fn to_config(&self, x: &[f64]) -> TxConfig {
        let n = self.entries;
        TxConfig::new((0..n).map(|i| TxEntry::new(x[n + i], x[i])).collect())
    }
}

impl Nlp for FootprintProblem<'_> {
    fn dim(&self) -> usize {
        2 * self.entries
    }

    fn num_constraints(&self) -> usize {
        self.apps.len()
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn linear_rows(&self) -> &[(Vec<f64>, f64)] {
        &self.linear
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let n = self.entries;
        let psr = &self.models.psr;
        (0..n)
            .map(|i| self.models.t_pkt * x[i] * psr.spatial_integral(x[n + i]))
            .sum()
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let n = self.entries;
        let w = &self.models.wilson;
        for (j, app) in self.apps.iter().enumerate() {
            out[j] = (0..n)
                .map(|i| wilson_lower_count(x[i], self.rho(app, x[n + i]), w))
                .sum::<f64>()
                - app.rate_hz;
        }
    }

    fn derivatives(&self, x: &[f64], grad: &mut [f64], jac: &mut [f64]) {
        let n = self.entries;
        let dim = 2 * n;
        let t_pkt = self.models.t_pkt;
        let psr = &self.models.psr;
        let w = &self.models.wilson;
        for i in 0..n {
            let (rate, power) = (x[i], x[n + i]);
            let (p_lo, p_hi) = self.power_pair(power);
            grad[i] = t_pkt * psr.spatial_integral(power);
            grad[n + i] = t_pkt * rate * (psr.spatial_integral(p_hi) - psr.spatial_integral(p_lo)) / (p_hi - p_lo);

            let h = 1e-6 * rate.max(1.0);
            let (t_lo, t_hi) = if rate > h {
                (rate - h, rate + h)
            } else {
                (rate, rate + h)
            };
            for (j, app) in self.apps.iter().enumerate() {
                let rho = self.rho(app, power);
                jac[j * dim + i] =
                    (wilson_lower_count(t_hi, rho, w) - wilson_lower_count(t_lo, rho, w)) / (t_hi - t_lo);
                let up = wilson_lower_count(rate, self.rho(app, p_hi), w);
                let down = wilson_lower_count(rate, self.rho(app, p_lo), w);
                jac[j * dim + n + i] = (up - down) / (p_hi - p_lo);
            }
        }
    }
}

/// Raises, app by app, the rate of the entry at the app's own PRESTO power
/// until its summed bound is met. Combining per-app pairs can leave an app
/// short because the bound of a split rate is below that of the whole.
fn patch_combined(
    combined: &TxConfig,
    pairs: &[(f64, f64)],
    apps: &[AppRequirement],
    cbr: f64,
    models: &Models,
    t_max: f64,
) -> Option<Vec<TxEntry>> {
    let mut entries = combined.entries().to_vec();
    let w = &models.wilson;
    let bound = |entries: &[TxEntry], app: &AppRequirement| -> f64 {
        entries
            .iter()
            .map(|e| wilson_lower_count(e.rate_hz, models.table.lookup(app.cr_m, e.power_dbm, cbr), w))
            .sum()
    };
    for _ in 0..3 {
        for (app, &(power, _)) in apps.iter().zip(pairs) {
            if bound(&entries, app) >= app.rate_hz {
                continue;
            }
            let i = entries.iter().position(|e| e.power_dbm == power)?;
            let base = entries[i].rate_hz;
            let (mut lo, mut hi) = (base, t_max);
            entries[i].rate_hz = hi;
            if bound(&entries, app) < app.rate_hz {
                return None;
            }
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                entries[i].rate_hz = mid;
                if bound(&entries, app) >= app.rate_hz {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            entries[i].rate_hz = hi;
        }
    }
    Some(entries)
}

/// First `n` entries of `entries`, extended by copies of their powers at
/// `fill_rate` (or by idle entries at `p_min` when there are none).
fn pad(entries: &[TxEntry], n: usize, fill_rate: f64, p_min: f64) -> Vec<TxEntry> {
    let mut out: Vec<TxEntry> = entries.iter().copied().take(n).collect();
    let k = out.len();
    for i in k..n {
        let power = if k > 0 { entries[i % k].power_dbm } else { p_min };
        out.push(TxEntry::new(power, fill_rate));
    }
    out
}

fn flatten(entries: &[TxEntry]) -> Vec<f64> {
    let mut x: Vec<f64> = entries.iter().map(|e| e.rate_hz).collect();
    x.extend(entries.iter().map(|e| e.power_dbm));
    x
}

/// Raises all rates by a tiny factor until the requirements hold exactly; the
/// solver only meets constraints to its tolerance.
fn restore_feasibility(
    cfg: TxConfig,
    apps: &[AppRequirement],
    cbr: f64,
    models: &Models,
    limits: &TxLimits,
) -> Option<TxConfig> {
    let ok = |c: &TxConfig| {
        c.validate(limits).is_ok()
            && requirements_satisfied(c, apps, cbr, &models.table, &models.wilson)
                .iter()
                .all(|&s| s)
    };
    if ok(&cfg) {
        return Some(cfg);
    }
    let mut factor = 1e-9;
    for _ in 0..16 {
        let scaled = TxConfig::new(
            cfg.entries()
                .iter()
                .map(|e| TxEntry::new(e.power_dbm, (e.rate_hz * (1.0 + factor)).min(limits.t_max_hz)))
                .collect(),
        );
        if ok(&scaled) {
            return Some(scaled);
        }
        factor *= 4.0;
    }
    None
}

/// MERLIN: minimum-footprint continuous configuration of `n_v` entries whose
/// summed Wilson bounds meet every application at load `cbr`.
///
/// Runs SQP from the PRESTO solution (combined and per-application) and from
/// starts spread over the power range, checks every result against the
/// requirements, and returns the feasible result of least footprint. The
/// PRESTO configurations themselves are candidates too.
pub fn merlin(apps: &[AppRequirement], cbr: f64, models: &Models, opts: &MerlinOptions) -> Result<TxConfig> {
    if apps.is_empty() {
        return Err(Error::NoApplications);
    }
    // The bound never exceeds the sent rate, itself capped at T_max.
    if apps.iter().any(|a| a.rate_hz > opts.t_max_hz) {
        return Err(Error::SolverInfeasible);
    }
    let n_v = opts.n_v.unwrap_or(2 * apps.len()).max(1);
    let phy = models.phy();
    let limits = limits_of(models, opts);
    let problem = FootprintProblem::new(apps, cbr, models, n_v, opts);
    let mut candidates: Vec<TxConfig> = Vec::new();
    let mut starts: Vec<Vec<TxEntry>> = Vec::new();

    if let Ok(pairs) = presto_pairs(apps, cbr, models, &opts.warm_start_grid) {
        let combined = presto_combine(&pairs);
        let separate: Vec<TxEntry> = pairs.iter().map(|&(p, t)| TxEntry::new(p, t)).collect();
        candidates.push(TxConfig::new(pad(combined.entries(), n_v, 0.0, phy.p_min_dbm)));
        candidates.push(TxConfig::new(pad(&separate, n_v, 0.0, phy.p_min_dbm)));
        starts.push(pad(combined.entries(), n_v, 0.05, phy.p_min_dbm));
        starts.push(pad(&separate, n_v, 0.05, phy.p_min_dbm));
        if let Some(patched) = patch_combined(&combined, &pairs, apps, cbr, models, opts.t_max_hz) {
            candidates.push(TxConfig::new(pad(&patched, n_v, 0.0, phy.p_min_dbm)));
            starts.push(pad(&patched, n_v, 0.05, phy.p_min_dbm));
        }
    }
    let max_rate = apps.iter().map(|a| a.rate_hz).fold(0.0, f64::max);
    let spread_rate = (1.5 * max_rate).min(opts.t_max_hz) / n_v as f64;
    let span = phy.p_max_dbm - phy.p_min_dbm;
    for s in 0..opts.spread_starts {
        let p_lo = phy.p_min_dbm + span * s as f64 / opts.spread_starts as f64;
        starts.push(
            (0..n_v)
                .map(|i| {
                    let p = p_lo + (phy.p_max_dbm - p_lo) * (i + 1) as f64 / n_v as f64;
                    TxEntry::new(p, spread_rate)
                })
                .collect(),
        );
    }

    let sqp = SqpOptions {
        max_iter: opts.max_iter,
        ..SqpOptions::default()
    };
    let mut any_converged = false;
    let mut iterations = 0;
    for start in &starts {
        let outcome = minimize(&problem, &flatten(start), &sqp);
        any_converged |= outcome.converged;
        iterations = iterations.max(outcome.iterations);
        candidates.push(problem.to_config(&outcome.x));
    }

    match least_footprint(candidates, apps, cbr, models, &limits) {
        Some(cfg) => Ok(cfg),
        None if any_converged => Err(Error::SolverInfeasible),
        None => Err(Error::SolverNonConvergence { iterations }),
    }
}

fn limits_of(models: &Models, opts: &MerlinOptions) -> TxLimits {
    let phy = models.phy();
    TxLimits {
        p_min_dbm: phy.p_min_dbm,
        p_max_dbm: phy.p_max_dbm,
        t_max_hz: opts.t_max_hz,
        cap_total_rate: opts.cap_total_rate,
    }
}

/// The feasible candidate (after restoring feasibility) of least footprint.
fn least_footprint(
    candidates: Vec<TxConfig>,
    apps: &[AppRequirement],
    cbr: f64,
    models: &Models,
    limits: &TxLimits,
) -> Option<TxConfig> {
    let mut best: Option<(f64, TxConfig)> = None;
    for cfg in candidates {
        let Some(cfg) = restore_feasibility(cfg, apps, cbr, models, limits) else {
            continue;
        };
        let fp = footprint(&cfg, &models.psr, models.t_pkt);
        if best.as_ref().is_none_or(|(b, _)| fp < *b) {
            best = Some((fp, cfg));
        }
    }
    best.map(|(_, cfg)| cfg)
}

/// MERLIN from a single start, typically the previous solution of the same
/// vehicle at a nearby load. Falls back to [`merlin`] when neither the start
/// nor the refined point is feasible.
pub fn merlin_warm(
    apps: &[AppRequirement],
    cbr: f64,
    models: &Models,
    opts: &MerlinOptions,
    start: &TxConfig,
) -> Result<TxConfig> {
    if apps.is_empty() {
        return Err(Error::NoApplications);
    }
    let n_v = opts.n_v.unwrap_or(2 * apps.len()).max(1);
    let phy = models.phy();
    let problem = FootprintProblem::new(apps, cbr, models, n_v, opts);
    let padded = pad(start.entries(), n_v, 0.0, phy.p_min_dbm);
    let sqp = SqpOptions {
        max_iter: opts.max_iter,
        ..SqpOptions::default()
    };
    let outcome = minimize(&problem, &flatten(&padded), &sqp);
    let candidates = vec![TxConfig::new(padded), problem.to_config(&outcome.x)];
    match least_footprint(candidates, apps, cbr, models, &limits_of(models, opts)) {
        Some(cfg) => Ok(cfg),
        None => merlin(apps, cbr, models, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::presto;

    #[test]
    fn output_is_feasible_and_within_box() {
        let models = Models::default();
        let apps = [
            AppRequirement::untagged(60.0, 8.0).unwrap(),
            AppRequirement::untagged(200.0, 2.5).unwrap(),
        ];
        let opts = MerlinOptions::default();
        let cfg = merlin(&apps, 0.2, &models, &opts).unwrap();
        assert_eq!(cfg.len(), 4);
        let limits = TxLimits::from_phy(models.phy(), opts.t_max_hz);
        cfg.validate(&limits).unwrap();
        assert!(requirements_satisfied(&cfg, &apps, 0.2, &models.table, &models.wilson)
            .iter()
            .all(|&s| s));
        let p = presto(&apps, 0.2, &models, &ControllerGrid::table1()).unwrap();
        let fp_p = footprint(&p, &models.psr, models.t_pkt);
        let fp_m = footprint(&cfg, &models.psr, models.t_pkt);
        if requirements_satisfied(&p, &apps, 0.2, &models.table, &models.wilson)
            .iter()
            .all(|&s| s)
        {
            assert!(fp_m <= fp_p + 1e-6);
        }
    }

    #[test]
    fn unreachable_rate_is_infeasible() {
        let models = Models::default();
        let apps = [AppRequirement::untagged(50.0, 25.0).unwrap()];
        let err = merlin(&apps, 0.1, &models, &MerlinOptions::default()).unwrap_err();
        assert_eq!(err, Error::SolverInfeasible);
    }

    #[test]
    fn no_applications() {
        let models = Models::default();
        assert_eq!(
            merlin(&[], 0.1, &models, &MerlinOptions::default()),
            Err(Error::NoApplications)
        );
    }
}
