use alloc::vec;
use alloc::vec::Vec;

use super::ControllerGrid;
use crate::bounds::{wilson_lower_count, AppRequirement};
use crate::error::{Error, Result};
use crate::footprint::{entry_footprint, TxConfig, TxEntry};
use crate::models::Models;

/// Largest `(n_p · n_t)^n_v` the oracle accepts.
pub const ORACLE_SEARCH_LIMIT: f64 = 1e8;

/// Exhaustive search over every `n_v`-entry configuration on `grid` for the
/// feasible configuration of least footprint.
///
/// Each entry takes a power from `P_min + ΔP` up to `P_max` and a rate from 0
/// up to `T_max`; the summed rate is capped at `T_max`. Configurations are
/// visited in lexicographic order of (entry index, power descending, rate
/// ascending) and only a strictly smaller footprint replaces the incumbent.
pub fn brute_force_oracle(
    apps: &[AppRequirement],
    cbr: f64,
    models: &Models,
    grid: &ControllerGrid,
    n_v: usize,
) -> Result<TxConfig> {
    if apps.is_empty() {
        return Err(Error::NoApplications);
    }
    if n_v == 0 {
        return Err(Error::InvalidParameter("oracle needs at least one entry".into()));
    }
    let size = libm::pow((grid.n_p * grid.n_t) as f64, n_v as f64);
    if size > ORACLE_SEARCH_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: ORACLE_SEARCH_LIMIT,
        });
    }

    struct Choice {
        entry: TxEntry,
        footprint: f64,
        counts: Vec<f64>,
    }
    let mut choices = Vec::new();
    for k_p in (1..grid.n_p).rev() {
        let power = grid.power(k_p);
        let integral = models.psr.spatial_integral(power);
        let rhos: Vec<f64> = apps.iter().map(|a| models.table.lookup(a.cr_m, power, cbr)).collect();
        for k_t in 0..grid.n_t {
            let rate = grid.rate(k_t);
            choices.push(Choice {
                entry: TxEntry::new(power, rate),
                footprint: entry_footprint(models.t_pkt, rate, integral),
                counts: rhos
                    .iter()
                    .map(|&rho| wilson_lower_count(rate, rho, &models.wilson))
                    .collect(),
            });
        }
    }

    let mut digits = vec![0usize; n_v];
    let mut best = f64::INFINITY;
    let mut best_digits: Option<Vec<usize>> = None;
    let mut totals = vec![0.0; apps.len()];
    'outer: loop {
        let rate: f64 = digits.iter().map(|&d| choices[d].entry.rate_hz).sum();
        if rate <= grid.t_max * (1.0 + 1e-12) {
            let fp: f64 = digits.iter().map(|&d| choices[d].footprint).sum();
            if fp < best {
                totals.iter_mut().for_each(|t| *t = 0.0);
                for &d in &digits {
                    for (t, c) in totals.iter_mut().zip(&choices[d].counts) {
                        *t += c;
                    }
                }
                if totals.iter().zip(apps).all(|(t, a)| *t >= a.rate_hz) {
                    best = fp;
                    best_digits = Some(digits.clone());
                }
            }
        }
        // Odometer: the last entry varies fastest.
        for pos in (0..n_v).rev() {
            digits[pos] += 1;
            if digits[pos] < choices.len() {
                continue 'outer;
            }
            digits[pos] = 0;
        }
        break;
    }
    best_digits
        .map(|ds| TxConfig::new(ds.into_iter().map(|d| choices[d].entry).collect()))
        .ok_or(Error::SolverInfeasible)
}
