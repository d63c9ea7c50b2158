//! Static highway snapshots: vehicle placement, the CBR fixed point between
//! controllers and channel load, reception sampling and evaluation metrics.

mod cbr;
mod fixed_point;
mod metrics;
mod receptions;
mod scenario;

pub use cbr::compute_cbr;
pub use fixed_point::{fixed_point_run, Configure, Executor, FixedPointOptions, FixedPointReport, Sequential};
pub use metrics::{
    dp_profile, evaluate, evaluate_with_samples, sar, DpAccumulator, DpBin, EvalOptions, Histogram, MetricsReport,
    RuntimeStats, SarTally,
};
pub use receptions::{sample_receptions, Link, ReceptionPlan, Receptions};
pub use scenario::{
    assign_applications, draw_application, generate_scenario, populate_applications, Scenario, Vehicle,
    STATS_REGION_FRACTION,
};
