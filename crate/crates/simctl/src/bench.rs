//! Wall-clock distribution of single controller invocations on random
//! requirement sets.

use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use txctl_core::controllers::{merlin, presto};
use txctl_core::math::nearest_rank;
use txctl_core::sim::draw_application;
use txctl_core::{AppRequirement, ControllerGrid, MerlinOptions, Models};

pub const MIN_REPETITIONS: usize = 30;
pub const PERCENTILES: [f64; 7] = [5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub controller: String,
    pub n_a: usize,
    pub reps: usize,
    /// Invocations that returned an error; their time still counts.
    pub errors: usize,
    /// Seconds at each of [`PERCENTILES`].
    pub percentiles: Vec<f64>,
}

impl BenchRow {
    pub fn median(&self) -> f64 {
        self.percentiles[3]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, controller: &str, n_a: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.controller == controller && r.n_a == n_a)
    }

    /// MERLIN median over PRESTO median.
    pub fn ratio(&self, n_a: usize) -> Option<f64> {
        Some(self.row("merlin", n_a)?.median() / self.row("presto", n_a)?.median())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["controller".to_string(), "n_a".into(), "reps".into(), "errors".into()];
        header.extend(PERCENTILES.iter().map(|p| format!("p{p}_s")));
        header.push("merlin_presto_median_ratio".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut row = vec![
                r.controller.clone(),
                r.n_a.to_string(),
                r.reps.to_string(),
                r.errors.to_string(),
            ];
            row.extend(r.percentiles.iter().map(f64::to_string));
            let ratio = if r.controller == "merlin" {
                self.ratio(r.n_a)
            } else {
                None
            };
            row.push(ratio.map(|x| x.to_string()).unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn row(controller: &str, n_a: usize, mut times: Vec<f64>, errors: usize) -> BenchRow {
    times.sort_by(f64::total_cmp);
    BenchRow {
        controller: controller.into(),
        n_a,
        reps: times.len(),
        errors,
        percentiles: PERCENTILES
            .iter()
            .map(|&p| nearest_rank(&times, p).expect("at least one repetition"))
            .collect(),
    }
}

/// Times PRESTO on `grid`, PRESTO with the power step doubled (about half
/// the power levels) and MERLIN on the same `reps` random requirement sets
/// for each N_A, CBR drawn from 0.1…0.8. Rows are named `presto`,
/// `presto_half_np` and `merlin`.
pub fn benchmark(
    models: &Models,
    grid: &ControllerGrid,
    merlin_opts: &MerlinOptions,
    n_a_values: &[usize],
    reps: usize,
    seed: u64,
) -> Result<BenchReport> {
    if reps < MIN_REPETITIONS {
        bail!("need at least {MIN_REPETITIONS} repetitions, got {reps}");
    }
    let half = ControllerGrid::new(grid.delta_t, 2.0 * grid.delta_p, grid.t_max, grid.p_min, grid.p_max)
        .map_err(|e| anyhow::anyhow!("halved grid: {e}"))?;
    let mut rows = Vec::new();
    for &n_a in n_a_values {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n_a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let cases: Vec<(Vec<AppRequirement>, f64)> = (0..reps)
            .map(|_| {
                let apps = (0..n_a).map(|_| draw_application(&mut rng)).collect();
                (apps, rng.random_range(1..=8) as f64 / 10.0)
            })
            .collect();
        let mut run = |name: &str, f: &dyn Fn(&[AppRequirement], f64) -> bool| {
            // One untimed call warms caches and the allocator.
            f(&cases[0].0, cases[0].1);
            let mut times = Vec::with_capacity(reps);
            let mut errors = 0;
            for (apps, cbr) in &cases {
                let start = Instant::now();
                let ok = std::hint::black_box(f(apps, *cbr));
                times.push(start.elapsed().as_secs_f64());
                errors += usize::from(!ok);
            }
            rows.push(row(name, n_a, times, errors));
        };
        run("presto", &|apps, cbr| presto(apps, cbr, models, grid).is_ok());
        run("presto_half_np", &|apps, cbr| presto(apps, cbr, models, &half).is_ok());
        run("merlin", &|apps, cbr| merlin(apps, cbr, models, merlin_opts).is_ok());
    }
    Ok(BenchReport { rows })
}
