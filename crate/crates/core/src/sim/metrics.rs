use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{ReceptionPlan, Receptions, Scenario};
use crate::error::{Error, Result};
use crate::math::nearest_rank;
use crate::models::Models;

/// Satisfied and total (transmitter, application, receiver) observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SarTally {
    pub satisfied: u64,
    pub total: u64,
}

impl SarTally {
    /// A triple counts when the receiver lies within the application's range;
    /// it is satisfied when the receiver got at least `R_j · window` packets.
    pub fn add(&mut self, scenario: &Scenario, receptions: &Receptions) {
        for (link, &got) in receptions.links.iter().zip(&receptions.totals) {
            for app in &scenario.vehicles[link.tx].apps {
                if link.distance_m <= app.cr_m {
                    self.total += 1;
                    if f64::from(got) >= app.rate_hz * receptions.window_s {
                        self.satisfied += 1;
                    }
                }
            }
        }
    }

    pub fn percentage(&self) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::NoEligibleTriples);
        }
        Ok(100.0 * self.satisfied as f64 / self.total as f64)
    }
}

/// Percentage of satisfied triples in one window.
pub fn sar(scenario: &Scenario, receptions: &Receptions) -> Result<f64> {
    let mut tally = SarTally::default();
    tally.add(scenario, receptions);
    tally.percentage()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpBin {
    pub bin_start_m: f64,
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
    pub samples: usize,
}

/// Pools packet differences per distance bin over any number of windows.
#[derive(Debug, Clone)]
pub struct DpAccumulator {
    bin_m: f64,
    bins: BTreeMap<usize, Vec<f64>>,
}

impl DpAccumulator {
    pub fn new(bin_m: f64) -> Result<Self> {
        if !(bin_m > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "DP bin must be positive, got {bin_m}"
            )));
        }
        Ok(Self {
            bin_m,
            bins: BTreeMap::new(),
        })
    }

    /// `DP = received per second − required(d)`, where `required(d)` is the
    /// largest rate among the transmitter's applications whose range reaches
    /// `d`. Pairs that no application reaches are skipped.
    pub fn add(&mut self, scenario: &Scenario, receptions: &Receptions) {
        for (link, &got) in receptions.links.iter().zip(&receptions.totals) {
            let required = scenario.vehicles[link.tx]
                .apps
                .iter()
                .filter(|a| a.cr_m >= link.distance_m)
                .map(|a| a.rate_hz)
                .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
            let Some(required) = required else { continue };
            let bin = libm::floor(link.distance_m / self.bin_m) as usize;
            self.bins
                .entry(bin)
                .or_default()
                .push(f64::from(got) / receptions.window_s - required);
        }
    }

    /// Moves every sample of `other` into `self`. Both must use the same bin
    /// width.
    pub fn merge(&mut self, other: DpAccumulator) {
        debug_assert_eq!(self.bin_m, other.bin_m);
        for (k, values) in other.bins {
            self.bins.entry(k).or_default().extend(values);
        }
    }

    /// Non-empty bins in ascending distance; empty bins are absent.
    pub fn profile(&mut self) -> Vec<DpBin> {
        let bin_m = self.bin_m;
        self.bins
            .iter_mut()
            .filter_map(|(&k, values)| {
                values.sort_by(f64::total_cmp);
                Some(DpBin {
                    bin_start_m: k as f64 * bin_m,
                    mean: values.iter().sum::<f64>() / values.len() as f64,
                    p5: nearest_rank(values, 5.0)?,
                    p95: nearest_rank(values, 95.0)?,
                    samples: values.len(),
                })
            })
            .collect()
    }

    pub fn finish(mut self) -> Vec<DpBin> {
        self.profile()
    }
}

/// Packet-difference profile of one window in bins of `bin_m` metres.
pub fn dp_profile(scenario: &Scenario, receptions: &Receptions, bin_m: f64) -> Result<Vec<DpBin>> {
    let mut acc = DpAccumulator::new(bin_m)?;
    acc.add(scenario, receptions);
    Ok(acc.finish())
}

/// Weights over equal-width bins starting at `start`, normalised to sum to 1
/// (all zero when nothing was recorded).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub start: f64,
    pub bin_width: f64,
    pub weights: Vec<f64>,
}

impl Histogram {
    fn new(start: f64, end: f64, bin_width: f64) -> Self {
        let bins = (libm::ceil((end - start) / bin_width - 1e-9) as usize).max(1);
        Self {
            start,
            bin_width,
            weights: vec![0.0; bins],
        }
    }

    fn add(&mut self, x: f64, weight: f64) {
        let last = self.weights.len() - 1;
        let k = libm::floor((x - self.start) / self.bin_width).max(0.0) as usize;
        self.weights[k.min(last)] += weight;
    }

    fn normalise(mut self) -> Self {
        let total: f64 = self.weights.iter().sum();
        if total > 0.0 {
            for w in &mut self.weights {
                *w /= total;
            }
        }
        self
    }

    pub fn bin_start(&self, k: usize) -> f64 {
        self.start + k as f64 * self.bin_width
    }
}

/// Distribution of controller wall-clock times, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeStats {
    pub calls: usize,
    pub mean_s: f64,
    pub p5_s: f64,
    pub p50_s: f64,
    pub p95_s: f64,
}

impl RuntimeStats {
    pub fn from_samples(mut samples: Vec<f64>) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        samples.sort_by(f64::total_cmp);
        Some(Self {
            calls: samples.len(),
            mean_s: samples.iter().sum::<f64>() / samples.len() as f64,
            p5_s: nearest_rank(&samples, 5.0)?,
            p50_s: nearest_rank(&samples, 50.0)?,
            p95_s: nearest_rank(&samples, 95.0)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Mean local CBR over vehicles in the statistics region.
    pub mean_cbr: f64,
    /// Percentage pooled over all sampled windows.
    pub sar: f64,
    pub dp_profile: Vec<DpBin>,
    /// Transmitted packets by power, 1 dB bins.
    pub power_pdf: Histogram,
    /// Vehicles by total packet rate, 1 Hz bins.
    pub rate_pdf: Histogram,
    pub runtime_stats: Option<RuntimeStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub windows: u64,
    pub window_s: f64,
    pub dp_bin_m: f64,
    pub seed: u64,
    /// Upper end of the rate histogram.
    pub t_max_hz: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            windows: 100,
            window_s: 1.0,
            dp_bin_m: 10.0,
            seed: 0,
            t_max_hz: 20.0,
        }
    }
}

/// Samples `opts.windows` windows of a converged scenario and collects every
/// metric. Transmitter distributions and mean CBR use vehicles in the
/// statistics region only.
pub fn evaluate(scenario: &Scenario, models: &Models, opts: &EvalOptions) -> Result<MetricsReport> {
    evaluate_with_samples(scenario, models, opts).map(|(report, _)| report)
}

/// [`evaluate`], also returning the packet differences behind the DP profile
/// so that several scenarios can be pooled.
pub fn evaluate_with_samples(
    scenario: &Scenario,
    models: &Models,
    opts: &EvalOptions,
) -> Result<(MetricsReport, DpAccumulator)> {
    if !(opts.window_s > 0.0) || opts.windows == 0 {
        return Err(Error::InvalidParameter(
            "need at least one window of positive length".into(),
        ));
    }
    let plan = ReceptionPlan::new(scenario, &models.table);
    let mut receptions = plan.empty_receptions(opts.window_s);
    let mut tally = SarTally::default();
    let mut dp = DpAccumulator::new(opts.dp_bin_m)?;
    for w in 0..opts.windows {
        plan.sample_into(scenario, opts.seed, w, &mut receptions);
        tally.add(scenario, &receptions);
        dp.add(scenario, &receptions);
    }

    let phy = models.phy();
    let mut power_pdf = Histogram::new(phy.p_min_dbm, phy.p_max_dbm, 1.0);
    let mut rate_pdf = Histogram::new(0.0, opts.t_max_hz, 1.0);
    let (mut cbr_sum, mut counted) = (0.0, 0usize);
    for v in scenario
        .vehicles
        .iter()
        .filter(|v| scenario.in_stats_region(v.position_m))
    {
        cbr_sum += v.local_cbr;
        counted += 1;
        for e in v.tx_config.entries().iter().filter(|e| e.rate_hz > 0.0) {
            power_pdf.add(e.power_dbm, e.rate_hz);
        }
        rate_pdf.add(v.tx_config.total_rate(), 1.0);
    }
    if counted == 0 {
        return Err(Error::EmptyScenario);
    }
    let report = MetricsReport {
        mean_cbr: cbr_sum / counted as f64,
        sar: tally.percentage()?,
        dp_profile: dp.profile(),
        power_pdf: power_pdf.normalise(),
        rate_pdf: rate_pdf.normalise(),
        runtime_stats: None,
    };
    Ok((report, dp))
}
