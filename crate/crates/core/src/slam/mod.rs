//! Per-observation SLAM pipeline and its pose-graph back end.

mod graph;
mod pipeline;
mod report;

pub use graph::{factor_information, Factor, FactorKind, LmConfig, OptimizationSummary, PoseGraph};
pub use pipeline::{
    GateOutcome, GroundSlam, LoopCandidate, LoopThresholds, ObservationRecord, OdometryReport, OdometryStatus,
    SlamConfig, StageTimings, StepReport, DEGENERATE_ODOMETRY_VARIANCE, PRIOR_VARIANCE,
};
pub use report::{FactorRecord, RunReport, REPORT_FORMAT};
