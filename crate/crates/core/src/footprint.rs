//! Channel load generated by one transmitter.
//!
//! `load(d) = t_pkt · Σ T_i · PSR(d, P_i)` is the fraction of time a node at
//! distance `d` senses the transmitter's packets; the footprint is its
//! integral along the road, `t_pkt · Σ T_i · ∫ PSR(d, P_i) dd`.

use alloc::format;
use alloc::vec::Vec;

use crate::channel::{PhyParams, PsrModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxEntry {
    pub power_dbm: f64,
    pub rate_hz: f64,
}

impl TxEntry {
    pub fn new(power_dbm: f64, rate_hz: f64) -> Self {
        Self { power_dbm, rate_hz }
    }
}

/// Bounds a transmit configuration must respect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxLimits {
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    pub t_max_hz: f64,
    /// Also cap the summed rate of all entries at `t_max_hz`.
    pub cap_total_rate: bool,
}

impl TxLimits {
    pub fn from_phy(phy: &PhyParams, t_max_hz: f64) -> Self {
        Self {
            p_min_dbm: phy.p_min_dbm,
            p_max_dbm: phy.p_max_dbm,
            t_max_hz,
            cap_total_rate: true,
        }
    }
}

/// A list of `(power, rate)` pairs: `rate_hz` packets per second are sent at
/// `power_dbm`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TxConfig {
    entries: Vec<TxEntry>,
}

impl TxConfig {
    pub fn new(entries: Vec<TxEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[TxEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<TxEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_rate(&self) -> f64 {
        self.entries.iter().map(|e| e.rate_hz).sum()
    }

    /// Drops entries that send nothing.
    pub fn without_idle_entries(mut self) -> Self {
        self.entries.retain(|e| e.rate_hz > 0.0);
        self
    }

    pub fn validate(&self, limits: &TxLimits) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidParameter("configuration has no entries".into()));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.power_dbm >= limits.p_min_dbm && e.power_dbm <= limits.p_max_dbm) {
                return Err(Error::InvalidParameter(format!(
                    "entry {i}: power {} outside [{}, {}]",
                    e.power_dbm, limits.p_min_dbm, limits.p_max_dbm
                )));
            }
            if !(e.rate_hz >= 0.0 && e.rate_hz <= limits.t_max_hz) {
                return Err(Error::InvalidParameter(format!(
                    "entry {i}: rate {} outside [0, {}]",
                    e.rate_hz, limits.t_max_hz
                )));
            }
        }
        // A hair of slack for rates produced by floating-point subtraction.
        if limits.cap_total_rate && self.total_rate() > limits.t_max_hz * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "total rate {} exceeds {}",
                self.total_rate(),
                limits.t_max_hz
            )));
        }
        Ok(())
    }
}

/// Airtime of one packet, in seconds.
pub fn packet_duration(phy: &PhyParams) -> f64 {
    phy.message_size_bytes * 8.0 / phy.data_rate_bps + phy.phy_mac_overhead_s
}

/// Unclamped `t_pkt · Σ T_i · PSR(d, P_i)`.
pub fn load_at_unclamped(distance_m: f64, cfg: &TxConfig, psr: &PsrModel, t_pkt: f64) -> f64 {
    t_pkt
        * cfg
            .entries()
            .iter()
            .filter(|e| e.rate_hz > 0.0)
            .map(|e| e.rate_hz * psr.psr(distance_m, e.power_dbm))
            .sum::<f64>()
}

/// Channel occupancy caused at `distance_m`, clamped to 1.
pub fn load_at(distance_m: f64, cfg: &TxConfig, psr: &PsrModel, t_pkt: f64) -> f64 {
    load_at_unclamped(distance_m, cfg, psr, t_pkt).min(1.0)
}

/// Footprint of a single `(power, rate)` pair given its spatial PSR integral.
#[inline]
pub fn entry_footprint(t_pkt: f64, rate_hz: f64, spatial_integral_m: f64) -> f64 {
    t_pkt * rate_hz * spatial_integral_m
}

/// Footprint of a configuration; unclamped, linear in every rate.
pub fn footprint(cfg: &TxConfig, psr: &PsrModel, t_pkt: f64) -> f64 {
    cfg.entries()
        .iter()
        .map(|e| entry_footprint(t_pkt, e.rate_hz, psr.spatial_integral(e.power_dbm)))
        .sum()
}
