use alloc::vec::Vec;

use super::{received_power, PhyParams};
use crate::error::Result;
use crate::math::normal_cdf;

/// PSR below which the spatial integral is truncated.
const TRUNCATION_PSR: f64 = 1e-4;
/// Distance step of the trapezoid rule.
const INTEGRATION_STEP_M: f64 = 0.5;
/// Power resolution of the cached spatial integrals.
const CACHE_STEP_DB: f64 = 0.05;
const MAX_INTEGRATION_DISTANCE_M: f64 = 1e6;

/// Packet sensing model with per-power spatial integrals cached on a 0.05 dB
/// grid. Integrals between cache nodes are interpolated linearly, which is
/// exact at every node (and hence on any 0.05 dB multiple grid).
#[derive(Debug, Clone)]
pub struct PsrModel {
    phy: PhyParams,
    integrals: Vec<f64>,
}

impl PsrModel {
    pub fn new(phy: PhyParams) -> Result<Self> {
        phy.validate()?;
        let span = phy.p_max_dbm - phy.p_min_dbm;
        let nodes = libm::ceil(span / CACHE_STEP_DB - 1e-9) as usize + 1;
        let integrals = (0..nodes)
            .map(|k| {
                let p = (phy.p_min_dbm + k as f64 * CACHE_STEP_DB).min(phy.p_max_dbm);
                integrate_psr(&phy, p, INTEGRATION_STEP_M)
            })
            .collect();
        Ok(Self { phy, integrals })
    }

    pub fn phy(&self) -> &PhyParams {
        &self.phy
    }

    #[inline]
    pub fn psr(&self, distance_m: f64, power_dbm: f64) -> f64 {
        let margin = received_power(distance_m, power_dbm, &self.phy) - self.phy.carrier_sense_threshold_dbm;
        normal_cdf(margin / self.phy.shadowing_sigma_db)
    }

    /// Integral of PSR over the whole road for transmit power `power_dbm`, in m.
    /// Powers outside the configured range are clamped to it.
    pub fn spatial_integral(&self, power_dbm: f64) -> f64 {
        let p = power_dbm.clamp(self.phy.p_min_dbm, self.phy.p_max_dbm);
        let last = self.integrals.len() - 1;
        let f = (p - self.phy.p_min_dbm) / CACHE_STEP_DB;
        let k = (libm::floor(f) as usize).min(last);
        let frac = f - k as f64;
        if frac < 1e-9 || k == last {
            return self.integrals[k];
        }
        if frac > 1.0 - 1e-9 {
            return self.integrals[k + 1];
        }
        let node = self.phy.p_min_dbm + k as f64 * CACHE_STEP_DB;
        let next = (node + CACHE_STEP_DB).min(self.phy.p_max_dbm);
        let t = (p - node) / (next - node);
        self.integrals[k] + t * (self.integrals[k + 1] - self.integrals[k])
    }

    /// Distance beyond which PSR at `power_dbm` stays below `threshold`.
    pub fn range_below(&self, power_dbm: f64, threshold: f64) -> f64 {
        let mut d = 1.0;
        while self.psr(d, power_dbm) >= threshold && d < MAX_INTEGRATION_DISTANCE_M {
            d *= 1.05;
        }
        d
    }
}

/// Probability that a transmission at `power_dbm` is sensed at `distance_m`.
pub fn psr(distance_m: f64, power_dbm: f64, model: &PsrModel) -> f64 {
    model.psr(distance_m, power_dbm)
}

/// Cached `∫ PSR(d, P) dd` over the whole (1-D, two-sided) road.
pub fn psr_spatial_integral(power_dbm: f64, model: &PsrModel) -> f64 {
    model.spatial_integral(power_dbm)
}

/// Direct trapezoid integration of PSR over `d ∈ (-∞, ∞)`, computed as twice
/// the one-sided integral and truncated at the first sample with PSR below
/// 1e-4.
pub fn integrate_psr(phy: &PhyParams, power_dbm: f64, step_m: f64) -> f64 {
    let sensed = |d: f64| {
        let margin = received_power(d, power_dbm, phy) - phy.carrier_sense_threshold_dbm;
        normal_cdf(margin / phy.shadowing_sigma_db)
    };
    let mut prev = sensed(0.0);
    if prev < TRUNCATION_PSR {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut i = 1usize;
    loop {
        let d = i as f64 * step_m;
        let cur = sensed(d);
        sum += 0.5 * (prev + cur) * step_m;
        if cur < TRUNCATION_PSR || d >= MAX_INTEGRATION_DISTANCE_M {
            break;
        }
        prev = cur;
        i += 1;
    }
    2.0 * sum
}
