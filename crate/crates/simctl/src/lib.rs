//! Experiment runner around `txctl-core`: configuration files, the PDR table
//! and scenario CSV formats, the controller × density × N_A × seed matrix, the
//! runtime benchmark and the coarse-grid oracle check.

pub mod bench;
pub mod config;
pub mod oracle;
pub mod plots;
pub mod runner;
pub mod scenario_io;
pub mod table_io;

pub use config::{ControllerKind, ExperimentConfig};
pub use runner::{build_models, run_matrix, CellResult, MatrixResult};
