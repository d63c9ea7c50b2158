use alloc::string::String;

/// Errors produced by model construction, the controllers and the simulator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("PDR table is empty")]
    EmptyTable,
    #[error("PDR table is not monotone along {axis} at cell (d={distance_idx}, p={power_idx}, c={cbr_idx})")]
    NonMonotone {
        axis: &'static str,
        distance_idx: usize,
        power_idx: usize,
        cbr_idx: usize,
    },
    #[error("PDR value {value} outside [0, 1] at cell (d={distance_idx}, p={power_idx}, c={cbr_idx})")]
    ValueOutOfRange {
        value: f64,
        distance_idx: usize,
        power_idx: usize,
        cbr_idx: usize,
    },
    #[error("application list is empty")]
    NoApplications,
    #[error("no grid configuration satisfies application {app}")]
    Infeasible { app: usize },
    #[error("no solver start reached a feasible configuration")]
    SolverInfeasible,
    #[error("solver did not converge after {iterations} iterations")]
    SolverNonConvergence { iterations: usize },
    #[error("search space of {size} configurations exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: f64, limit: f64 },
    #[error("scenario contains no vehicles")]
    EmptyScenario,
    #[error("no eligible (transmitter, application, receiver) triples")]
    NoEligibleTriples,
}

pub type Result<T> = core::result::Result<T, Error>;
