//! Brute-force verification on a coarse grid: PRESTO's per-application
//! search against the exhaustive single-entry oracle, and MERLIN against
//! the exhaustive multi-entry oracle plus one grid cell of slack.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use txctl_core::controllers::{brute_force_oracle, merlin, presto_per_app, ORACLE_SEARCH_LIMIT};
use txctl_core::footprint::{entry_footprint, footprint};
use txctl_core::sim::draw_application;
use txctl_core::{AppRequirement, ControllerGrid, Error, MerlinOptions, Models, TxConfig};

/// ΔT = 1 Hz, ΔP = 5 dB over the Table 1 ranges.
pub fn coarse_grid() -> ControllerGrid {
    ControllerGrid::new(1.0, 5.0, 20.0, 0.0, 25.0).expect("static grid is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCase {
    pub apps: Vec<AppRequirement>,
    pub cbr: f64,
    /// Applications whose PRESTO pair differs from the single-entry oracle.
    pub presto_mismatches: Vec<usize>,
    /// `(merlin, oracle + slack)` footprints, when both ran.
    pub merlin_vs_oracle: Option<(f64, f64)>,
    /// MERLIN returned an error although the oracle found a configuration.
    pub merlin_failed: bool,
    pub note: Option<String>,
}

impl OracleCase {
    pub fn passed(&self) -> bool {
        self.presto_mismatches.is_empty()
            && !self.merlin_failed
            && self.merlin_vs_oracle.is_none_or(|(m, bound)| m <= bound)
    }
}

/// Footprint increase from raising every entry by one cell in both rate and
/// power.
fn one_cell_slack(cfg: &TxConfig, models: &Models, grid: &ControllerGrid) -> f64 {
    cfg.entries()
        .iter()
        .map(|e| {
            let up = (e.power_dbm + grid.delta_p).min(grid.p_max);
            entry_footprint(models.t_pkt, e.rate_hz + grid.delta_t, models.psr.spatial_integral(up))
                - entry_footprint(models.t_pkt, e.rate_hz, models.psr.spatial_integral(e.power_dbm))
        })
        .sum()
}

pub fn run_oracle(
    models: &Models,
    grid: &ControllerGrid,
    merlin_opts: &MerlinOptions,
    n_a: usize,
    cases: usize,
    seed: u64,
) -> Result<Vec<OracleCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fp = |cfg: &TxConfig| footprint(cfg, &models.psr, models.t_pkt);
    let too_large = || ((grid.n_p * grid.n_t) as f64).powi(n_a as i32) > ORACLE_SEARCH_LIMIT;
    let mut out = Vec::with_capacity(cases);
    for _ in 0..cases {
        let apps: Vec<AppRequirement> = (0..n_a).map(|_| draw_application(&mut rng)).collect();
        let cbr = rng.random_range(1..=8) as f64 / 10.0;
        let mut case = OracleCase {
            apps: apps.clone(),
            cbr,
            presto_mismatches: Vec::new(),
            merlin_vs_oracle: None,
            merlin_failed: false,
            note: None,
        };
        for (j, a) in apps.iter().enumerate() {
            let from_presto = presto_per_app(a, cbr, models, grid).ok();
            let from_oracle = brute_force_oracle(&[*a], cbr, models, grid, 1)
                .ok()
                .map(|c| (c.entries()[0].power_dbm, c.entries()[0].rate_hz));
            if from_presto != from_oracle {
                case.presto_mismatches.push(j);
            }
        }
        if too_large() {
            case.note = Some(format!(
                "{n_a}-entry oracle exceeds the search limit; MERLIN not checked"
            ));
        } else {
            match (
                brute_force_oracle(&apps, cbr, models, grid, n_a),
                merlin(&apps, cbr, models, merlin_opts),
            ) {
                (Ok(oracle), Ok(m)) => {
                    case.merlin_vs_oracle = Some((fp(&m), fp(&oracle) + one_cell_slack(&oracle, models, grid)))
                }
                (Err(Error::SolverInfeasible), Err(_)) => case.note = Some("no feasible grid configuration".into()),
                (Ok(_), Err(e)) => {
                    case.merlin_failed = true;
                    case.note = Some(format!("MERLIN: {e}"));
                }
                (Err(e), _) => case.note = Some(format!("oracle: {e}")),
            }
        }
        out.push(case);
    }
    Ok(out)
}
