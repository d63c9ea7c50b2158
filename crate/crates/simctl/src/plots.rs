//! CSV data series, one file per figure analog, plus the per-cell metrics.
//! Every row carries the cell it came from; wall-clock times are left out
//! so that identical runs write identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use txctl_core::sim::Histogram;
use txctl_core::PdrTable;

use crate::runner::{CellResult, MatrixResult};
use crate::scenario_io::save_scenario;

pub const METRICS: &str = "metrics.csv";
pub const PDR_CURVES: &str = "pdr_curves.csv";
pub const CBR_VS_DENSITY: &str = "cbr_vs_density.csv";
pub const SAR_VS_DENSITY: &str = "sar_vs_density.csv";
pub const PARAM_PDFS: &str = "param_pdfs.csv";
pub const DP_VS_DISTANCE: &str = "dp_vs_distance.csv";

/// Table powers that go into the PDR curves: every whole multiple of 5 dB.
fn curve_powers(table: &PdrTable) -> Vec<usize> {
    table
        .powers()
        .iter()
        .enumerate()
        .filter(|(_, p)| (**p / 5.0 - (**p / 5.0).round()).abs() < 1e-9)
        .map(|(i, _)| i)
        .collect()
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    let path = dir.join(name);
    csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))
}

fn cell_fields(c: &CellResult) -> [String; 4] {
    [
        c.controller.to_string(),
        c.density.to_string(),
        c.n_a.to_string(),
        c.seed.to_string(),
    ]
}

/// Writes every output file into `dir` and returns their paths.
pub fn emit_plot_data(dir: &Path, result: &MatrixResult, table: &PdrTable) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut w = writer(dir, METRICS)?;
    w.write_record([
        "controller",
        "density",
        "n_a",
        "seed",
        "mean_cbr",
        "sar",
        "converged",
        "iterations",
        "max_cbr_change",
        "infeasible_vehicles",
    ])?;
    for c in &result.cells {
        let fp = &c.fixed_point;
        let mut row = cell_fields(c).to_vec();
        row.extend([
            c.report.mean_cbr.to_string(),
            c.report.sar.to_string(),
            fp.converged.to_string(),
            fp.iterations.to_string(),
            fp.max_change.to_string(),
            fp.infeasible_vehicles.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = writer(dir, PDR_CURVES)?;
    w.write_record(["power_dbm", "cbr", "distance_m", "pdr"])?;
    for pi in curve_powers(table) {
        for (ci, c) in table.cbr_levels().iter().enumerate() {
            for (di, d) in table.distances().iter().enumerate() {
                w.write_record([
                    table.powers()[pi].to_string(),
                    c.to_string(),
                    d.to_string(),
                    table.cell(di, pi, ci).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = writer(dir, CBR_VS_DENSITY)?;
    w.write_record(["controller", "density", "n_a", "seed", "mean_cbr"])?;
    for c in &result.cells {
        let mut row = cell_fields(c).to_vec();
        row.push(c.report.mean_cbr.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = writer(dir, SAR_VS_DENSITY)?;
    w.write_record(["controller", "density", "n_a", "seed", "sar"])?;
    for c in &result.cells {
        let mut row = cell_fields(c).to_vec();
        row.push(c.report.sar.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = writer(dir, PARAM_PDFS)?;
    w.write_record([
        "controller",
        "density",
        "n_a",
        "seed",
        "parameter",
        "bin_start",
        "weight",
    ])?;
    for c in &result.cells {
        let hists: [(&str, &Histogram); 2] = [("power_dbm", &c.report.power_pdf), ("rate_hz", &c.report.rate_pdf)];
        for (name, h) in hists {
            for (k, weight) in h.weights.iter().enumerate() {
                let mut row = cell_fields(c).to_vec();
                row.extend([name.to_string(), h.bin_start(k).to_string(), weight.to_string()]);
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;

    let mut w = writer(dir, DP_VS_DISTANCE)?;
    w.write_record(["controller", "density", "n_a", "bin_m", "mean", "p5", "p95"])?;
    for g in &result.dp {
        for b in &g.bins {
            w.write_record([
                g.controller.to_string(),
                g.density.to_string(),
                g.n_a.to_string(),
                b.bin_start_m.to_string(),
                b.mean.to_string(),
                b.p5.to_string(),
                b.p95.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut files: Vec<PathBuf> = [
        METRICS,
        PDR_CURVES,
        CBR_VS_DENSITY,
        SAR_VS_DENSITY,
        PARAM_PDFS,
        DP_VS_DISTANCE,
    ]
    .iter()
    .map(|n| dir.join(n))
    .collect();

    let dumps: Vec<&CellResult> = result.cells.iter().filter(|c| c.scenario.is_some()).collect();
    if !dumps.is_empty() {
        let sub = dir.join("scenarios");
        fs::create_dir_all(&sub)?;
        for c in dumps {
            let name = format!("{}_d{}_na{}_s{}.csv", c.controller, c.density, c.n_a, c.seed);
            let path = sub.join(name);
            save_scenario(&path, c.scenario.as_ref().expect("filtered"))?;
            files.push(path);
        }
    }
    Ok(files)
}
