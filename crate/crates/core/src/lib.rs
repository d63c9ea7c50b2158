//! Transmit power and packet-rate control for 1-hop broadcast beacons in
//! multi-application vehicular networks.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure models and
//! algorithms:
//!
//! - [`channel`]: dual-slope propagation, packet sensing (PSR) and delivery
//!   (PDR) probabilities, and the tabulated PDR model the controllers consume.
//! - [`bounds`]: Wilson-score lower bound on received packets per second and
//!   the application constraint check.
//! - [`footprint`]: the channel-occupancy footprint objective and per-distance
//!   load contribution of a transmit configuration.
//! - [`controllers`]: MH, PRESTO and MERLIN, plus an exhaustive oracle.
//! - [`sim`]: static highway snapshots, the CBR fixed point, reception
//!   sampling and the evaluation metrics.
//!
//! File formats, the experiment runner and the CLI live in the `simctl` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bounds;
pub mod channel;
pub mod controllers;
mod error;
pub mod footprint;
pub mod math;
mod models;
pub mod sim;

pub use crate::bounds::{AppClass, AppRequirement, WilsonParams};
pub use crate::channel::{CollisionParams, PdrTable, PhyParams, PsrModel, TableSpec};
pub use crate::controllers::{Controller, ControllerGrid, MerlinOptions};
pub use crate::error::{Error, Result};
pub use crate::footprint::{TxConfig, TxEntry, TxLimits};
pub use crate::models::Models;
