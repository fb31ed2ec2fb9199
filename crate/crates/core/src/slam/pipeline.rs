use std::time::Instant;

use image::GrayImage;
use nalgebra::{Matrix3, Point2};
use serde::{Deserialize, Serialize};

use super::graph::{factor_information, Factor, LmConfig, OptimizationSummary, PoseGraph};
use crate::error::{Error, Result};
use crate::estimation::{covariance_score, estimate_transform, regularize_covariance, EstimatorConfig, PointPairs};
use crate::features::{extract, match_sets, DetectorConfig, FeatureSet, Match};
use crate::geometry::{CameraModel, GroundPoints, Pose2};
use crate::place_recognition::{BowDatabase, BowVector, Vocabulary};

/// Variance given to each axis of an odometry factor that could not be
/// estimated.
pub const DEGENERATE_ODOMETRY_VARIANCE: f64 = 1e2;
/// Variance of the prior anchoring pose 0.
pub const PRIOR_VARIANCE: f64 = 1e-12;

/// The three loop-closure gates, applied in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopThresholds {
    /// Minimum bag-of-words score, in `[0, 1]`.
    pub min_bow_score: f64,
    /// Minimum number of ratio-test keypoint matches.
    pub min_matches: usize,
    /// Maximum covariance score (log₁₀ of the largest eigenvalue).
    pub max_covariance_score: f64,
}

impl Default for LoopThresholds {
    fn default() -> Self {
        Self {
            min_bow_score: 0.3,
            min_matches: 30,
            max_covariance_score: -3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlamConfig {
    /// Descriptor ratio-test threshold.
    pub ratio: f64,
    /// A query from observation `n` only sees observations `≤ n − delay`.
    pub delay: usize,
    pub thresholds: LoopThresholds,
    pub estimator: EstimatorConfig,
    pub detector: DetectorConfig,
    pub optimizer: LmConfig,
    /// Fewer odometry matches than this yields a degenerate factor.
    pub min_odometry_matches: usize,
    pub loop_closure: bool,
    /// Smallest covariance eigenvalue admitted into a factor.
    pub covariance_floor: f64,
    /// Pose held by the prior on observation 0.
    pub origin: Pose2,
}

impl Default for SlamConfig {
    fn default() -> Self {
        Self {
            ratio: 0.7,
            delay: 5,
            thresholds: LoopThresholds::default(),
            estimator: EstimatorConfig::default(),
            detector: DetectorConfig::default(),
            optimizer: LmConfig::default(),
            min_odometry_matches: 10,
            loop_closure: true,
            covariance_floor: 1e-10,
            origin: Pose2::identity(),
        }
    }
}

impl SlamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return bad(format!("ratio must lie in (0, 1], got {}", self.ratio));
        }
        if self.delay < 2 {
            return bad(format!("delay must be at least 2, got {}", self.delay));
        }
        let t = &self.thresholds;
        if !(0.0..=1.0).contains(&t.min_bow_score) {
            return bad(format!("min_bow_score must lie in [0, 1], got {}", t.min_bow_score));
        }
        if t.min_matches < 2 {
            return bad(format!("min_matches must be at least 2, got {}", t.min_matches));
        }
        if t.max_covariance_score.is_nan() {
            return bad("max_covariance_score is NaN".into());
        }
        if self.min_odometry_matches < 2 {
            return bad("min_odometry_matches must be at least 2".into());
        }
        if !(self.covariance_floor > 0.0) {
            return bad("covariance_floor must be > 0".into());
        }
        self.estimator.validate()?;
        self.detector.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationRecord {
    pub id: usize,
    pub features: FeatureSet,
    pub bow: BowVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum OdometryStatus {
    Estimated,
    /// Identity measurement with inflated covariance.
    Degenerate(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdometryReport {
    pub matches: usize,
    #[serde(flatten)]
    pub status: OdometryStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateOutcome {
    Accepted,
    TooFewMatches,
    /// The transform could not be estimated from the matches.
    Degenerate,
    CovarianceTooLarge,
}

/// One loop-closure candidate that passed the BoW gate, with the scores of
/// every gate it reached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopCandidate {
    pub query: usize,
    pub candidate: usize,
    pub bow_score: f64,
    pub matches: usize,
    pub covariance_score: Option<f64>,
    pub outcome: GateOutcome,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub extraction_ms: f64,
    pub odometry_ms: f64,
    pub loop_closure_ms: f64,
    pub optimization_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub id: usize,
    pub features: usize,
    pub odometry: Option<OdometryReport>,
    /// Candidates that passed the BoW gate.
    pub loop_candidates: usize,
    /// Older observations joined to this one by new loop factors.
    pub loop_closures: Vec<usize>,
    pub optimization: Option<OptimizationSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<StageTimings>,
}

/// Incremental ground-texture SLAM: odometry, gated loop closures and
/// pose-graph optimization, one observation at a time.
#[derive(Clone, Debug)]
pub struct GroundSlam {
    camera: CameraModel,
    vocabulary: Vocabulary,
    config: SlamConfig,
    graph: PoseGraph,
    records: Vec<ObservationRecord>,
    database: BowDatabase,
    audit: Vec<LoopCandidate>,
    steps: Vec<StepReport>,
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

impl GroundSlam {
    pub fn new(camera: CameraModel, vocabulary: Vocabulary, config: SlamConfig) -> Result<Self> {
        config.validate()?;
        let database = BowDatabase::new(config.delay as u64);
        Ok(Self {
            camera,
            vocabulary,
            config,
            graph: PoseGraph::new(),
            records: Vec::new(),
            database,
            audit: Vec::new(),
            steps: Vec::new(),
        })
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn config(&self) -> &SlamConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn graph(&self) -> &PoseGraph {
        &self.graph
    }

    pub fn poses(&self) -> &[Pose2] {
        self.graph.poses()
    }

    pub fn records(&self) -> &[ObservationRecord] {
        &self.records
    }

    pub fn audit(&self) -> &[LoopCandidate] {
        &self.audit
    }

    pub fn steps(&self) -> &[StepReport] {
        &self.steps
    }

    /// Extracts features from `image` and processes them.
    pub fn process_image(&mut self, image: &GrayImage) -> Result<Pose2> {
        let start = Instant::now();
        let features = extract(image, &self.camera, &self.config.detector)?;
        self.process(features, elapsed_ms(start))
    }

    /// Processes already extracted ground-plane features and returns the
    /// current pose estimate.
    pub fn process_features(&mut self, features: FeatureSet) -> Result<Pose2> {
        self.process(features, 0.0)
    }

    fn process(&mut self, features: FeatureSet, extraction_ms: f64) -> Result<Pose2> {
        let id = self.records.len();
        let bow = self.vocabulary.to_bow(features.descriptors());
        let record = ObservationRecord { id, features, bow };
        let mut timing = StageTimings {
            extraction_ms,
            ..Default::default()
        };
        let mut step = StepReport {
            id,
            features: record.features.len(),
            odometry: None,
            loop_candidates: 0,
            loop_closures: Vec::new(),
            optimization: None,
            timing: None,
        };

        if id == 0 {
            let pose = self.config.origin;
            self.graph.add_pose(pose);
            let info = Matrix3::identity() / PRIOR_VARIANCE;
            self.graph.add_factor(Factor::prior(0, pose, info)?)?;
        } else {
            let start = Instant::now();
            let (factor, report) = self.odometry_step(&self.records[id - 1], &record.features)?;
            let pose = self.graph.poses()[id - 1].compose(factor.measurement());
            self.graph.add_pose(pose);
            self.graph.add_factor(factor)?;
            step.odometry = Some(report);
            timing.odometry_ms = elapsed_ms(start);
        }

        if self.config.loop_closure {
            let start = Instant::now();
            if let Some(ready) = id.checked_sub(self.config.delay) {
                self.database
                    .insert(ready as u64, self.records[ready].bow.clone())?;
            }
            let (factors, candidates) = self.find_loop_closures(&record);
            step.loop_candidates = candidates.len();
            self.audit.extend(candidates);
            for f in factors {
                step.loop_closures.push(f.from().expect("loop factors have two poses"));
                self.graph.add_factor(f)?;
            }
            timing.loop_closure_ms = elapsed_ms(start);

            if !step.loop_closures.is_empty() {
                let start = Instant::now();
                step.optimization = Some(self.graph.optimize(&self.config.optimizer)?);
                timing.optimization_ms = elapsed_ms(start);
            }
        }

        step.timing = Some(timing);
        self.steps.push(step);
        self.records.push(record);
        Ok(self.graph.poses()[id])
    }

    /// Odometry factor from `prev` to the observation holding `current`.
    /// Never fails on weak data: too few matches or a degenerate fit gives
    /// an identity measurement with inflated covariance.
    pub fn odometry_step(&self, prev: &ObservationRecord, current: &FeatureSet) -> Result<(Factor, OdometryReport)> {
        let (from, to) = (prev.id, prev.id + 1);
        let matches = match_sets(current, &prev.features, self.config.ratio).unwrap_or_default();
        let degenerate = |reason: String| -> Result<(Factor, OdometryReport)> {
            let info = Matrix3::identity() / DEGENERATE_ODOMETRY_VARIANCE;
            Ok((
                Factor::odometry(from, to, Pose2::identity(), info)?,
                OdometryReport {
                    matches: matches.len(),
                    status: OdometryStatus::Degenerate(reason),
                },
            ))
        };
        if matches.len() < self.config.min_odometry_matches {
            return degenerate(format!(
                "{} matches, {} required",
                matches.len(),
                self.config.min_odometry_matches
            ));
        }
        let pairs = paired_points(current, &prev.features, &matches)?;
        match estimate_transform(&pairs, &self.config.estimator) {
            Ok(est) => {
                let info = factor_information(&est.covariance, &est.transform, self.config.covariance_floor);
                Ok((
                    Factor::odometry(from, to, est.transform, info)?,
                    OdometryReport {
                        matches: matches.len(),
                        status: OdometryStatus::Estimated,
                    },
                ))
            }
            Err(e) => degenerate(e.to_string()),
        }
    }

    /// Runs the BoW, match-count and covariance gates for `current` against
    /// the database. A candidate rejected by one gate never reaches the
    /// next. Returns the accepted loop factors and the audit of every
    /// candidate that passed the BoW gate.
    pub fn find_loop_closures(&self, current: &ObservationRecord) -> (Vec<Factor>, Vec<LoopCandidate>) {
        let mut factors = Vec::new();
        let mut audit = Vec::new();
        for c in self
            .database
            .query(&current.bow, current.id as u64, self.config.thresholds.min_bow_score)
        {
            let (factor, entry) = self.gate_candidate(current, c.id as usize, c.score);
            factors.extend(factor);
            audit.push(entry);
        }
        (factors, audit)
    }

    /// Match-count and covariance gates for one candidate that already
    /// passed the BoW gate with `bow_score`. Candidates are independent of
    /// each other.
    pub fn gate_candidate(
        &self,
        current: &ObservationRecord,
        candidate: usize,
        bow_score: f64,
    ) -> (Option<Factor>, LoopCandidate) {
        let t = &self.config.thresholds;
        let old = &self.records[candidate];
        let mut entry = LoopCandidate {
            query: current.id,
            candidate,
            bow_score,
            matches: 0,
            covariance_score: None,
            outcome: GateOutcome::TooFewMatches,
        };
        let matches = match_sets(&current.features, &old.features, self.config.ratio).unwrap_or_default();
        entry.matches = matches.len();
        if matches.len() < t.min_matches {
            return (None, entry);
        }
        let estimate = paired_points(&current.features, &old.features, &matches)
            .and_then(|pairs| estimate_transform(&pairs, &self.config.estimator));
        let Ok(est) = estimate else {
            entry.outcome = GateOutcome::Degenerate;
            return (None, entry);
        };
        let covariance = regularize_covariance(&est.covariance, self.config.covariance_floor);
        let score = covariance_score(&covariance).expect("regularized covariance is positive");
        entry.covariance_score = Some(score);
        if score > t.max_covariance_score {
            entry.outcome = GateOutcome::CovarianceTooLarge;
            return (None, entry);
        }
        let info = factor_information(&est.covariance, &est.transform, self.config.covariance_floor);
        match Factor::loop_closure(old.id, current.id, est.transform, info) {
            Ok(f) => {
                entry.outcome = GateOutcome::Accepted;
                (Some(f), entry)
            }
            Err(_) => {
                entry.outcome = GateOutcome::Degenerate;
                (None, entry)
            }
        }
    }
}

/// Matched points with the query observation as source, so the fitted
/// transform is `train_pose⁻¹ · query_pose`.
fn paired_points(query: &FeatureSet, train: &FeatureSet, matches: &[Match]) -> Result<PointPairs> {
    let src: GroundPoints = matches
        .iter()
        .map(|m| query.ground_points()[m.query_index])
        .collect();
    let dst: Vec<Point2<f64>> = matches
        .iter()
        .map(|m| train.ground_points()[m.train_index])
        .collect();
    PointPairs::new(src, dst)
}
