use std::sync::Mutex;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use txctl_core::sim::{
    evaluate_with_samples, fixed_point_run, generate_scenario, populate_applications, Configure, DpAccumulator, DpBin,
    FixedPointReport, MetricsReport, RuntimeStats, Scenario, Sequential,
};
use txctl_core::{AppRequirement, Controller, Models, TxConfig, WilsonParams};

use crate::config::{ControllerKind, ExperimentConfig};
use crate::table_io::load_table;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "SIMCTL_THREADS";

#[derive(Debug, Clone)]
pub struct CellResult {
    pub controller: ControllerKind,
    pub density: f64,
    pub n_a: usize,
    pub seed: u64,
    /// `runtime_stats` holds wall-clock controller times and is the only
    /// field that differs between identical runs.
    pub report: MetricsReport,
    pub fixed_point: FixedPointReport,
    /// Kept only when the configuration asks for scenario dumps.
    pub scenario: Option<Scenario>,
}

/// DP profile of one (controller, density, N_A) group, pooled over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct DpGroup {
    pub controller: ControllerKind,
    pub density: f64,
    pub n_a: usize,
    pub bins: Vec<DpBin>,
}

#[derive(Debug, Clone)]
pub struct MatrixResult {
    /// Controller, density, N_A, seed order of the configuration.
    pub cells: Vec<CellResult>,
    pub dp: Vec<DpGroup>,
}

impl MatrixResult {
    /// One line per cell that did not converge or had vehicles whose
    /// requirements the controller could not meet.
    pub fn problems(&self) -> Vec<String> {
        self.cells
            .iter()
            .filter(|c| !c.fixed_point.converged || c.fixed_point.infeasible_vehicles > 0)
            .map(|c| {
                format!(
                    "{} density={} n_a={} seed={}: converged={} iterations={} infeasible_vehicles={}",
                    c.controller,
                    c.density,
                    c.n_a,
                    c.seed,
                    c.fixed_point.converged,
                    c.fixed_point.iterations,
                    c.fixed_point.infeasible_vehicles
                )
            })
            .collect()
    }

    pub fn cell(&self, controller: ControllerKind, density: f64, n_a: usize, seed: u64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.controller == controller && c.density == density && c.n_a == n_a && c.seed == seed)
    }

    pub fn dp_group(&self, controller: ControllerKind, density: f64, n_a: usize) -> Option<&DpGroup> {
        self.dp
            .iter()
            .find(|g| g.controller == controller && g.density == density && g.n_a == n_a)
    }
}

pub fn build_models(cfg: &ExperimentConfig) -> Result<Models> {
    let wilson = WilsonParams::new(cfg.alpha).map_err(|e| anyhow!("{e}"))?;
    match &cfg.table_file {
        Some(path) => {
            let table = load_table(path)?;
            Models::with_table(&cfg.phy, table, wilson).map_err(|e| anyhow!("{e}"))
        }
        None => Models::build(&cfg.phy, &cfg.collision, &cfg.table_spec, wilson).map_err(|e| anyhow!("{e}")),
    }
}

pub fn controller_for(kind: ControllerKind, cfg: &ExperimentConfig) -> Controller {
    match kind {
        ControllerKind::Mh => Controller::Mh {
            fixed_power_dbm: cfg.mh_power_dbm,
        },
        ControllerKind::Presto => Controller::Presto {
            grid: cfg.grid,
            drop_idle: cfg.presto_drop_idle,
        },
        ControllerKind::Merlin => Controller::Merlin(cfg.merlin.clone()),
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seeds of one (density, N_A, seed) cell: placement, applications,
/// reception sampling. Independent of the controller, so all controllers of
/// a cell see the same road and the same requirements.
pub fn cell_seeds(seed: u64, density: f64, n_a: usize) -> (u64, u64, u64) {
    let placement = splitmix(splitmix(seed) ^ density.to_bits());
    let apps = splitmix(placement ^ n_a as u64);
    (placement, apps, splitmix(apps ^ 0x5A5A_5A5A))
}

/// Times every controller call.
struct Timed<'a> {
    inner: &'a Controller,
    samples: Mutex<Vec<f64>>,
}

impl Configure for Timed<'_> {
    fn configure(
        &self,
        apps: &[AppRequirement],
        cbr: f64,
        models: &Models,
        previous: Option<&TxConfig>,
    ) -> txctl_core::Result<TxConfig> {
        let start = Instant::now();
        let out = Configure::configure(self.inner, apps, cbr, models, previous);
        let elapsed = start.elapsed().as_secs_f64();
        self.samples.lock().expect("timing lock").push(elapsed);
        out
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    models: &Models,
    controller: &Controller,
    density: f64,
    n_a: usize,
    seed: u64,
) -> Result<(CellResult, DpAccumulator)> {
    let kind = ControllerKind::parse(controller.name()).expect("controller names match kinds");
    let (placement, apps, sampling) = cell_seeds(seed, density, n_a);
    let mut scenario = generate_scenario(density, cfg.road_length_m, cfg.lanes, placement)?;
    populate_applications(&mut scenario, n_a, apps)?;
    let timed = Timed {
        inner: controller,
        samples: Mutex::new(Vec::new()),
    };
    let fixed_point = fixed_point_run(&mut scenario, &timed, models, &cfg.fixed_point, &Sequential)?;
    let eval = txctl_core::sim::EvalOptions {
        seed: sampling,
        ..cfg.eval.clone()
    };
    let (mut report, dp) = evaluate_with_samples(&scenario, models, &eval)?;
    report.runtime_stats = RuntimeStats::from_samples(timed.samples.into_inner().expect("timing lock"));
    let cell = CellResult {
        controller: kind,
        density,
        n_a,
        seed,
        report,
        fixed_point,
        scenario: cfg.dump_scenarios.then_some(scenario),
    };
    Ok((cell, dp))
}

/// Worker pool sized by `SIMCTL_THREADS` when set, else by rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        builder = builder.num_threads(n);
    }
    builder.build().context("building worker pool")
}

/// Runs every (controller, density, N_A, seed) cell. Cells of one
/// (controller, density, N_A) group run in seed order on one worker so their
/// DP samples can be pooled; groups run in parallel.
pub fn run_matrix(cfg: &ExperimentConfig, models: &Models) -> Result<MatrixResult> {
    cfg.validate()?;
    let mut groups = Vec::new();
    for &kind in &cfg.controllers {
        for &density in &cfg.densities {
            for &n_a in &cfg.n_a_values {
                groups.push((kind, density, n_a));
            }
        }
    }
    let pool = thread_pool()?;
    let done: Vec<(Vec<CellResult>, DpGroup)> = pool.install(|| {
        groups
            .par_iter()
            .map(|&(kind, density, n_a)| -> Result<_> {
                let controller = controller_for(kind, cfg);
                let mut pooled = DpAccumulator::new(cfg.eval.dp_bin_m)?;
                let mut cells = Vec::with_capacity(cfg.seeds.len());
                for &seed in &cfg.seeds {
                    let (cell, dp) = run_cell(cfg, models, &controller, density, n_a, seed)
                        .with_context(|| format!("{kind} density={density} n_a={n_a} seed={seed}"))?;
                    pooled.merge(dp);
                    cells.push(cell);
                }
                let group = DpGroup {
                    controller: kind,
                    density,
                    n_a,
                    bins: pooled.finish(),
                };
                Ok((cells, group))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut result = MatrixResult {
        cells: Vec::new(),
        dp: Vec::new(),
    };
    for (cells, group) in done {
        result.cells.extend(cells);
        result.dp.push(group);
    }
    Ok(result)
}
