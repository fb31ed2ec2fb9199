//! Trajectory error metrics, loop-closure precision/recall and SVG plots.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Pose2};

/// How the estimate is placed on the ground truth before comparison.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    /// Rigidly map estimated pose 0 onto true pose 0.
    #[default]
    FirstPose,
    /// Compare in the estimate's own frame.
    None,
}

impl std::str::FromStr for Alignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first-pose" => Ok(Self::FirstPose),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidConfig(format!("unknown alignment `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryErrors {
    /// Mean position error in centimeters per meter of true path.
    pub translational_mae_normalized: f64,
    /// Mean position error, meters.
    pub translational_mae: f64,
    /// Mean absolute heading error, degrees.
    pub rotational_mae: f64,
    /// Length of the true path, meters.
    pub path_length: f64,
    pub final_position_error: f64,
    pub final_heading_error: f64,
}

pub fn path_length(poses: &[Pose2]) -> f64 {
    poses
        .windows(2)
        .map(|w| (w[1].translation() - w[0].translation()).norm())
        .sum()
}

pub fn align(estimated: &[Pose2], truth: &[Pose2], alignment: Alignment) -> Vec<Pose2> {
    match (alignment, estimated.first(), truth.first()) {
        (Alignment::FirstPose, Some(e0), Some(t0)) => {
            let map = t0.compose(&e0.inverse());
            estimated.iter().map(|p| map.compose(p)).collect()
        }
        _ => estimated.to_vec(),
    }
}

pub fn evaluate(estimated: &[Pose2], truth: &[Pose2], alignment: Alignment) -> Result<TrajectoryErrors> {
    if estimated.len() != truth.len() {
        return Err(Error::InsufficientData(format!(
            "{} estimated poses but {} ground-truth poses",
            estimated.len(),
            truth.len()
        )));
    }
    if truth.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 poses to evaluate".into()));
    }
    let length = path_length(truth);
    if !(length > 0.0) {
        return Err(Error::InsufficientData("ground-truth path has zero length".into()));
    }
    let aligned = align(estimated, truth, alignment);
    let n = truth.len() as f64;
    let pos_err = |i: usize| (aligned[i].translation() - truth[i].translation()).norm();
    let rot_err = |i: usize| normalize_angle(aligned[i].theta() - truth[i].theta()).abs().to_degrees();
    let mae = (0..truth.len()).map(pos_err).sum::<f64>() / n;
    let last = truth.len() - 1;
    Ok(TrajectoryErrors {
        translational_mae_normalized: mae * 100.0 / length,
        translational_mae: mae,
        rotational_mae: (0..truth.len()).map(rot_err).sum::<f64>() / n,
        path_length: length,
        final_position_error: pos_err(last),
        final_heading_error: rot_err(last),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopClosureRecord {
    pub from: usize,
    pub to: usize,
    /// Length of the measured relative translation, meters.
    pub estimated_distance: f64,
    /// True distance between the two poses, meters.
    pub actual_distance: f64,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopClosureAudit {
    pub records: Vec<LoopClosureRecord>,
    /// `None` when nothing was accepted.
    pub precision: Option<f64>,
    /// `None` when the ground truth has no closable pair.
    pub recall: Option<f64>,
    pub ground_truth_pairs: usize,
    pub radius: f64,
}

/// Pose pairs at most `radius` apart whose ids differ by at least `delay`.
pub fn ground_truth_pairs(truth: &[Pose2], radius: f64, delay: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for j in 0..truth.len() {
        for i in 0..(j + 1).saturating_sub(delay.max(1)) {
            if (truth[j].translation() - truth[i].translation()).norm() < radius {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Scores loop closures `(from, to, measurement)` against the truth. A
/// closure is correct when the true poses are closer than `radius`.
pub fn loop_closure_audit(
    closures: &[(usize, usize, Pose2)],
    truth: &[Pose2],
    radius: f64,
    delay: usize,
) -> Result<LoopClosureAudit> {
    let mut records = Vec::with_capacity(closures.len());
    for &(from, to, m) in closures {
        let (Some(a), Some(b)) = (truth.get(from), truth.get(to)) else {
            return Err(Error::InsufficientData(format!(
                "loop closure {from}–{to} has no ground truth"
            )));
        };
        let actual = (b.translation() - a.translation()).norm();
        records.push(LoopClosureRecord {
            from,
            to,
            estimated_distance: m.translation().norm(),
            actual_distance: actual,
            correct: actual < radius,
        });
    }
    let pairs = ground_truth_pairs(truth, radius, delay);
    let correct = records.iter().filter(|r| r.correct).count();
    let mut found: Vec<(usize, usize)> = records
        .iter()
        .filter(|r| r.correct)
        .map(|r| (r.from.min(r.to), r.from.max(r.to)))
        .filter(|p| pairs.binary_search_by(|q| (q.1, q.0).cmp(&(p.1, p.0))).is_ok())
        .collect();
    found.sort_unstable();
    found.dedup();
    Ok(LoopClosureAudit {
        precision: (!records.is_empty()).then(|| correct as f64 / records.len() as f64),
        recall: (!pairs.is_empty()).then(|| found.len() as f64 / pairs.len() as f64),
        ground_truth_pairs: pairs.len(),
        radius,
        records,
    })
}

/// Metrics emitted for a run with ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sequence: String,
    pub alignment: Alignment,
    #[serde(flatten)]
    pub trajectory: TrajectoryErrors,
    pub loop_closures: LoopClosureAudit,
    /// Wall time per image, milliseconds, when the run recorded it.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing_ms: Option<Vec<f64>>,
}

const SVG_SIZE: f64 = 600.0;
const SVG_PAD: f64 = 40.0;

struct Frame {
    min: (f64, f64),
    scale: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for (x, y) in points {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        if !lo.0.is_finite() {
            lo = (0.0, 0.0);
            hi = (1.0, 1.0);
        }
        let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-9);
        Self {
            min: lo,
            scale: (SVG_SIZE - 2.0 * SVG_PAD) / span,
        }
    }

    /// SVG coordinates with y pointing up.
    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            SVG_PAD + (x - self.min.0) * self.scale,
            SVG_SIZE - SVG_PAD - (y - self.min.1) * self.scale,
        )
    }
}

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
        s = SVG_SIZE
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        SVG_SIZE / 2.0,
        title
    );
}

/// Overlaid trajectories, one polyline per `(label, poses, color)`, plus
/// dashed segments for `links` between poses of the first trajectory.
pub fn trajectory_svg(series: &[(&str, &[Pose2], &str)], links: &[(usize, usize)]) -> String {
    let frame = Frame::fit(series.iter().flat_map(|s| s.1.iter().map(|p| (p.x(), p.y()))));
    let mut out = String::new();
    svg_open(&mut out, "Trajectory");
    if let Some((_, poses, _)) = series.first() {
        for &(i, j) in links {
            if let (Some(a), Some(b)) = (poses.get(i), poses.get(j)) {
                let (a, b) = (frame.map((a.x(), a.y())), frame.map((b.x(), b.y())));
                let _ = writeln!(
                    out,
                    r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728" stroke-dasharray="3,3"/>"##,
                    a.0, a.1, b.0, b.1
                );
            }
        }
    }
    for (k, (label, poses, color)) in series.iter().enumerate() {
        let pts: Vec<String> = poses
            .iter()
            .map(|p| {
                let (x, y) = frame.map((p.x(), p.y()));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            color
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{}">{}</text>"#,
            SVG_PAD,
            SVG_SIZE - 12.0 - 14.0 * k as f64,
            color,
            label
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Estimated against actual loop-closure distance with the `y = x` line.
pub fn scatter_svg(records: &[LoopClosureRecord]) -> String {
    let max = records
        .iter()
        .flat_map(|r| [r.estimated_distance, r.actual_distance])
        .fold(1e-3f64, f64::max);
    let frame = Frame::fit([(0.0, 0.0), (max, max)].into_iter());
    let mut out = String::new();
    svg_open(&mut out, "Loop closures: estimated vs actual distance (m)");
    let (a, b) = (frame.map((0.0, 0.0)), frame.map((max, max)));
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4,4"/>"##,
        a.0, a.1, b.0, b.1
    );
    for r in records {
        let (x, y) = frame.map((r.actual_distance, r.estimated_distance));
        let color = if r.correct { "#1f77b4" } else { "#d62728" };
        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
    }
    out.push_str("</svg>\n");
    out
}
