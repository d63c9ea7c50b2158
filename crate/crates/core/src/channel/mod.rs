//! Propagation, sensing and delivery models.
//!
//! Mean received power follows a dual-slope log-distance law anchored at the
//! free-space loss at 1 m plus a fixed extra loss. Log-normal shadowing turns
//! a power margin into a probability: the packet sensing ratio (PSR) uses the
//! carrier-sense threshold, the propagation part of the packet delivery ratio
//! (PDR) uses the receiver sensitivity. Collisions enter the PDR through a
//! multiplicative term that grows with the experienced channel busy ratio.

mod psr;
mod table;

pub use psr::{integrate_psr, psr, psr_spatial_integral, PsrModel};
pub use table::{build_pdr_table, pdr_lookup, PdrTable, TableSpec};

use alloc::format;

use crate::error::{Error, Result};
use crate::math::{log10, normal_cdf, pow};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radio and link parameters shared by every model.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyParams {
    pub carrier_freq_hz: f64,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    pub carrier_sense_threshold_dbm: f64,
    pub receiver_sensitivity_dbm: f64,
    pub shadowing_sigma_db: f64,
    pub extra_loss_db: f64,
    pub breakpoint_m: f64,
    /// Path-loss exponent up to the breakpoint.
    pub n1: f64,
    /// Path-loss exponent beyond the breakpoint.
    pub n2: f64,
    pub data_rate_bps: f64,
    pub message_size_bytes: f64,
    pub phy_mac_overhead_s: f64,
}

impl Default for PhyParams {
    fn default() -> Self {
        Self {
            carrier_freq_hz: 5.9e9,
            p_min_dbm: 0.0,
            p_max_dbm: 25.0,
            carrier_sense_threshold_dbm: -85.0,
            receiver_sensitivity_dbm: -85.0,
            shadowing_sigma_db: 3.0,
            extra_loss_db: 10.0,
            breakpoint_m: 300.0,
            n1: 1.8,
            n2: 2.8,
            data_rate_bps: 6e6,
            message_size_bytes: 250.0,
            phy_mac_overhead_s: 40e-6,
        }
    }
}

impl PhyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("phy: {what}")));
        if !(self.p_min_dbm < self.p_max_dbm) {
            return bad("p_min must be below p_max");
        }
        if !(self.shadowing_sigma_db > 0.0) {
            return bad("shadowing_sigma must be positive");
        }
        if !(self.data_rate_bps > 0.0) {
            return bad("data_rate must be positive");
        }
        if !(self.message_size_bytes > 0.0) {
            return bad("message_size must be positive");
        }
        if !(self.carrier_freq_hz > 0.0) {
            return bad("carrier_freq must be positive");
        }
        if !(self.breakpoint_m >= 1.0) {
            return bad("breakpoint must be at least 1 m");
        }
        if !(self.n1 > 0.0 && self.n2 > 0.0) {
            return bad("path-loss exponents must be positive");
        }
        if !(self.phy_mac_overhead_s >= 0.0) {
            return bad("phy_mac_overhead must be non-negative");
        }
        Ok(())
    }

    /// Loss at the 1 m reference distance: free space plus the extra loss.
    pub fn reference_loss_db(&self) -> f64 {
        20.0 * log10(4.0 * core::f64::consts::PI * self.carrier_freq_hz / SPEED_OF_LIGHT) + self.extra_loss_db
    }

    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(1.0);
        let reference = self.reference_loss_db();
        if d <= self.breakpoint_m {
            reference + 10.0 * self.n1 * log10(d)
        } else {
            reference + 10.0 * self.n1 * log10(self.breakpoint_m) + 10.0 * self.n2 * log10(d / self.breakpoint_m)
        }
    }
}

/// Mean received power in dBm at `distance_m` for transmit power `power_dbm`.
/// Distances below 1 m are evaluated at 1 m.
pub fn received_power(distance_m: f64, power_dbm: f64, phy: &PhyParams) -> f64 {
    power_dbm - phy.path_loss_db(distance_m)
}

/// Collision loss term `g(C) = gamma * C^kappa` of the PDR model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionParams {
    pub gamma: f64,
    pub kappa: f64,
}

impl Default for CollisionParams {
    fn default() -> Self {
        Self { gamma: 0.5, kappa: 1.5 }
    }
}

impl CollisionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma < 1.0) || !(self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "collision: need 0 <= gamma < 1 and kappa > 0, got gamma={} kappa={}",
                self.gamma, self.kappa
            )));
        }
        Ok(())
    }

    /// Fraction of otherwise decodable packets lost to collisions at load `cbr`.
    pub fn loss_fraction(&self, cbr: f64) -> f64 {
        self.gamma * pow(cbr.clamp(0.0, 1.0), self.kappa)
    }
}

/// Delivery probability from propagation alone.
pub fn pdr_propagation(distance_m: f64, power_dbm: f64, phy: &PhyParams) -> f64 {
    let margin = received_power(distance_m, power_dbm, phy) - phy.receiver_sensitivity_dbm;
    normal_cdf(margin / phy.shadowing_sigma_db)
}

/// Packet delivery ratio at distance `distance_m`, power `power_dbm` and
/// channel busy ratio `cbr`.
pub fn pdr(distance_m: f64, power_dbm: f64, cbr: f64, phy: &PhyParams, collision: &CollisionParams) -> f64 {
    pdr_propagation(distance_m, power_dbm, phy) * (1.0 - collision.loss_fraction(cbr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_power_at_one_metre() {
        let phy = PhyParams::default();
        // 20 log10(4 pi 5.9e9 / c) = 47.865 dB, plus 10 dB extra.
        let fspl = 20.0 * libm::log10(4.0 * core::f64::consts::PI * 5.9e9 / 299_792_458.0);
        assert!((fspl - 47.8648).abs() < 1e-3);
        let pr = received_power(1.0, 25.0, &phy);
        assert!((pr - (-32.8648)).abs() < 1e-3, "{pr}");
    }

    #[test]
    fn received_power_is_linear_in_tx_power() {
        let phy = PhyParams::default();
        let hi = received_power(1.0, 25.0, &phy);
        let lo = received_power(1.0, 0.0, &phy);
        assert_eq!(hi - lo, 25.0);
    }

    #[test]
    fn first_slope_per_decade() {
        let phy = PhyParams {
            n1: 2.27,
            breakpoint_m: 500.0,
            ..PhyParams::default()
        };
        let drop = received_power(10.0, 20.0, &phy) - received_power(100.0, 20.0, &phy);
        assert!((drop - 22.7).abs() < 1e-9);
    }

    #[test]
    fn zero_distance_is_clamped() {
        let phy = PhyParams::default();
        assert_eq!(received_power(0.0, 10.0, &phy), received_power(1.0, 10.0, &phy));
    }

    #[test]
    fn path_loss_continuous_at_breakpoint() {
        let phy = PhyParams::default();
        let bp = phy.breakpoint_m;
        let below = phy.path_loss_db(bp);
        let above = phy.path_loss_db(bp * (1.0 + 1e-12));
        assert!((below - above).abs() < 1e-6);
    }

    #[test]
    fn pdr_examples() {
        let phy = PhyParams::default();
        let col = CollisionParams::default();
        assert!((pdr(1.0, 25.0, 0.0, &phy, &col) - 1.0).abs() < 1e-12);
        assert!(pdr(100.0, 25.0, 0.8, &phy, &col) < pdr(100.0, 25.0, 0.1, &phy, &col));
        assert!(pdr(200.0, 20.0, 0.3, &phy, &col) >= pdr(200.0, 10.0, 0.3, &phy, &col));
    }

    #[test]
    fn invalid_phy_rejected() {
        let phy = PhyParams {
            p_min_dbm: 30.0,
            ..PhyParams::default()
        };
        assert!(phy.validate().is_err());
        let phy = PhyParams {
            shadowing_sigma_db: 0.0,
            ..PhyParams::default()
        };
        assert!(phy.validate().is_err());
        assert!(CollisionParams { gamma: 1.0, kappa: 1.0 }.validate().is_err());
    }
}
