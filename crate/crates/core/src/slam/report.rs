use serde::{Deserialize, Serialize};

use super::graph::{Factor, FactorKind};
use super::pipeline::{GroundSlam, LoopCandidate, SlamConfig, StepReport};
use crate::geometry::Pose2;

pub const REPORT_FORMAT: &str = "ground-slam-run/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorRecord {
    pub kind: FactorKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub from: Option<usize>,
    pub to: usize,
    pub measurement: Pose2,
    /// Row-major information matrix.
    pub information: [[f64; 3]; 3],
}

impl From<&Factor> for FactorRecord {
    fn from(f: &Factor) -> Self {
        let i = f.information();
        Self {
            kind: f.kind(),
            from: f.from(),
            to: f.to(),
            measurement: *f.measurement(),
            information: std::array::from_fn(|r| std::array::from_fn(|c| i[(r, c)])),
        }
    }
}

/// Everything a run produced: final poses, the factor graph, the
/// loop-closure audit trail and per-image statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp_unix: Option<u64>,
    pub sequence: String,
    pub config: SlamConfig,
    pub poses: Vec<Pose2>,
    pub factors: Vec<FactorRecord>,
    pub loop_audit: Vec<LoopCandidate>,
    pub steps: Vec<StepReport>,
    pub degenerate_odometry: usize,
    pub loop_closures: usize,
}

impl RunReport {
    /// Snapshot of `slam`. Without `timestamp` the report omits the wall
    /// clock and every stage timing, so identical runs serialize identically.
    pub fn from_slam(slam: &GroundSlam, sequence: &str, timestamp: bool) -> Self {
        let mut steps = slam.steps().to_vec();
        if !timestamp {
            for s in &mut steps {
                s.timing = None;
            }
        }
        let factors: Vec<FactorRecord> = slam.graph().factors().iter().map(FactorRecord::from).collect();
        Self {
            format: REPORT_FORMAT.to_string(),
            timestamp_unix: timestamp.then(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs())
            }),
            sequence: sequence.to_string(),
            config: slam.config().clone(),
            poses: slam.poses().to_vec(),
            degenerate_odometry: steps
                .iter()
                .filter(|s| {
                    s.odometry
                        .as_ref()
                        .is_some_and(|o| o.status != super::OdometryStatus::Estimated)
                })
                .count(),
            loop_closures: factors.iter().filter(|f| f.kind == FactorKind::Loop).count(),
            factors,
            loop_audit: slam.audit().to_vec(),
            steps,
        }
    }

    pub fn loop_factors(&self) -> impl Iterator<Item = &FactorRecord> {
        self.factors.iter().filter(|f| f.kind == FactorKind::Loop)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
