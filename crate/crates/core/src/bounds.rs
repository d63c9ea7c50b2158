//! Lower confidence bound on packets received per second, and the test of a
//! transmit configuration against application requirements.
//!
//! Receptions of `T` packets sent with delivery probability `rho` are treated
//! as `Binomial(T, rho)`. The bound is `T` times the Wilson-score lower limit
//! of the success proportion, so the number of packets received in one second
//! falls below it with probability about `alpha / 2`. Real-valued `T` is
//! accepted by continuous extension of the same formula.

use alloc::format;
use alloc::vec::Vec;

use crate::channel::PdrTable;
use crate::error::{Error, Result};
use crate::footprint::TxConfig;
use crate::math::{normal_quantile, sqrt};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilsonParams {
    pub alpha: f64,
    /// `Φ⁻¹(1 − α/2)`.
    pub z: f64,
}

impl WilsonParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            z: normal_quantile(1.0 - alpha / 2.0),
        })
    }
}

impl Default for WilsonParams {
    fn default() -> Self {
        Self::new(0.05).expect("alpha = 0.05 is valid")
    }
}

/// The rate-dependent factors of the bound, so that a fixed packet rate can
/// be evaluated against many delivery probabilities cheaply.
/// [`wilson_lower_count`] goes through this type, so both paths agree
/// bit for bit.
#[derive(Debug, Clone, Copy)]
pub struct WilsonTerms {
    rate: f64,
    z: f64,
    scale: f64,
    shift: f64,
    inv_rate: f64,
    offset: f64,
}

impl WilsonTerms {
    pub fn new(rate: f64, wilson: &WilsonParams) -> Self {
        let z = wilson.z;
        let z2 = z * z;
        if rate <= 0.0 {
            return Self {
                rate: 0.0,
                z,
                scale: 0.0,
                shift: 0.0,
                inv_rate: 0.0,
                offset: 0.0,
            };
        }
        Self {
            rate,
            z,
            // T · T/(T + z²): the proportion bound times T.
            scale: rate * rate / (rate + z2),
            shift: z2 / (2.0 * rate),
            inv_rate: 1.0 / rate,
            offset: z2 / (4.0 * rate * rate),
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    #[inline]
    pub fn count(&self, rho: f64) -> f64 {
        if self.rate <= 0.0 {
            return 0.0;
        }
        let spread = self.z * sqrt(rho * (1.0 - rho) * self.inv_rate + self.offset);
        let bound = self.scale * (rho + self.shift - spread);
        bound.clamp(0.0, self.rate * rho)
    }
}

/// Expected packets received per second, `T · ρ`.
pub fn mean_received(rate: f64, rho: f64) -> f64 {
    rate * rho
}

/// Wilson lower bound on packets received per second when `rate` packets per
/// second are sent with delivery probability `rho`. Zero when `rate` is zero.
pub fn wilson_lower_count(rate: f64, rho: f64, wilson: &WilsonParams) -> f64 {
    WilsonTerms::new(rate, wilson).count(rho)
}

/// Sum of the per-entry bounds of `cfg` at distance `distance_m` and load `cbr`.
pub fn aggregate_lower_count(
    cfg: &TxConfig,
    distance_m: f64,
    cbr: f64,
    table: &PdrTable,
    wilson: &WilsonParams,
) -> f64 {
    cfg.entries()
        .iter()
        .filter(|e| e.rate_hz > 0.0)
        .map(|e| {
            let rho = table.lookup(distance_m, e.power_dbm, cbr);
            wilson_lower_count(e.rate_hz, rho, wilson)
        })
        .sum()
}

/// For each application, whether the bound at its communication range meets
/// its required reception rate.
pub fn requirements_satisfied(
    cfg: &TxConfig,
    apps: &[AppRequirement],
    cbr: f64,
    table: &PdrTable,
    wilson: &WilsonParams,
) -> Vec<bool> {
    apps.iter()
        .map(|app| aggregate_lower_count(cfg, app.cr_m, cbr, table, wilson) >= app.rate_hz)
        .collect()
}

/// Application classes: each pairs a communication-range band with a
/// reception-rate band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AppClass {
    A,
    B,
    C,
}

impl AppClass {
    pub const ALL: [AppClass; 3] = [AppClass::A, AppClass::B, AppClass::C];

    /// `(low, high]` communication range in m.
    pub fn range_band(self) -> (f64, f64) {
        match self {
            AppClass::A => (0.0, 80.0),
            AppClass::B => (80.0, 160.0),
            AppClass::C => (160.0, 240.0),
        }
    }

    /// Reception-rate band in Hz; closed for A, `[low, high)` for B and C.
    pub fn rate_band(self) -> (f64, f64) {
        match self {
            AppClass::A => (7.0, 10.0),
            AppClass::B => (4.0, 7.0),
            AppClass::C => (1.0, 4.0),
        }
    }

    pub fn contains(self, cr_m: f64, rate_hz: f64) -> bool {
        let (cr_lo, cr_hi) = self.range_band();
        let (r_lo, r_hi) = self.rate_band();
        let rate_ok = match self {
            AppClass::A => rate_hz >= r_lo && rate_hz <= r_hi,
            _ => rate_hz >= r_lo && rate_hz < r_hi,
        };
        cr_m > cr_lo && cr_m <= cr_hi && rate_ok
    }

    pub fn as_char(self) -> char {
        match self {
            AppClass::A => 'A',
            AppClass::B => 'B',
            AppClass::C => 'C',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'A' | 'a' => Some(AppClass::A),
            'B' | 'b' => Some(AppClass::B),
            'C' | 'c' => Some(AppClass::C),
            _ => None,
        }
    }
}

/// One application's demand: `rate_hz` packets per second received out to
/// `cr_m` metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppRequirement {
    pub cr_m: f64,
    pub rate_hz: f64,
    pub class: Option<AppClass>,
}

impl AppRequirement {
    pub fn new(cr_m: f64, rate_hz: f64, class: Option<AppClass>) -> Result<Self> {
        if !(cr_m > 0.0) || !(rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "application needs cr > 0 and rate > 0, got cr={cr_m} rate={rate_hz}"
            )));
        }
        if let Some(class) = class {
            if !class.contains(cr_m, rate_hz) {
                return Err(Error::InvalidParameter(format!(
                    "application (cr={cr_m}, rate={rate_hz}) lies outside class {}",
                    class.as_char()
                )));
            }
        }
        Ok(Self { cr_m, rate_hz, class })
    }

    pub fn untagged(cr_m: f64, rate_hz: f64) -> Result<Self> {
        Self::new(cr_m, rate_hz, None)
    }
}
