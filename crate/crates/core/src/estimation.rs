//! Robust SE(2) registration of matched ground points.
//!
//! The transform `T` minimizing `Σ ρ(‖dstₙ − T·srcₙ‖)` with the Huber kernel
//! `ρ` is found by iteratively reweighted Gauss–Newton, starting from the
//! closed-form unweighted rigid fit. The covariance reported with it is
//! `σ̂² (JᵀWJ)⁻¹` where `σ̂ = 1.4826 · median|r|` is a robust noise scale
//! taken over the weighted residual components.

use nalgebra::{Matrix2x3, Matrix3, Point2, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GroundPoints, Pose2};

/// Consistency constant turning a median absolute deviation into a Gaussian σ.
const MAD_TO_SIGMA: f64 = 1.4826;

/// Corresponding ground points of two observations: `dst ≈ T · src`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointPairs {
    src: GroundPoints,
    dst: GroundPoints,
}

impl PointPairs {
    pub fn new(src: GroundPoints, dst: GroundPoints) -> Result<Self> {
        if src.len() != dst.len() {
            return Err(Error::InsufficientData(format!(
                "{} source points but {} destination points",
                src.len(),
                dst.len()
            )));
        }
        if src.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 point pairs, got {}",
                src.len()
            )));
        }
        Ok(Self { src, dst })
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    pub fn src(&self) -> &GroundPoints {
        &self.src
    }

    pub fn dst(&self) -> &GroundPoints {
        &self.dst
    }

    pub fn residual(&self, transform: &Pose2, i: usize) -> Vector2<f64> {
        transform.transform_point(&self.src[i]) - self.dst[i]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Huber breakpoint, meters.
    pub huber_delta: f64,
    pub max_iterations: usize,
    /// Stop once the Gauss–Newton update norm falls below this.
    pub tolerance: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            huber_delta: 0.005,
            max_iterations: 50,
            tolerance: 1e-10,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.huber_delta > 0.0) {
            return Err(Error::InvalidConfig("huber_delta must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformEstimate {
    /// Maps source-frame points into the destination frame.
    pub transform: Pose2,
    /// Covariance of `(x, y, θ)`: m², m², rad² on the diagonal.
    pub covariance: Matrix3<f64>,
    /// Final Huber weight of every pair, in `(0, 1]`.
    pub inlier_weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Robust residual scale σ̂, meters.
    pub sigma: f64,
}

/// IRLS weight of the Huber kernel: `1` inside the breakpoint, `δ/r` beyond.
pub fn huber_weight(residual_norm: f64, delta: f64) -> f64 {
    if residual_norm <= delta {
        1.0
    } else {
        delta / residual_norm
    }
}

/// Jacobian of `T·src − dst` with respect to `(x, y, θ)` of `T`.
pub fn residual_jacobian(transform: &Pose2, src: &Point2<f64>) -> Matrix2x3<f64> {
    let (s, c) = transform.theta().sin_cos();
    Matrix2x3::new(
        1.0,
        0.0,
        -s * src.x - c * src.y,
        0.0,
        1.0,
        c * src.x - s * src.y,
    )
}

/// Closed-form weighted least-squares rigid fit (2-D Procrustes).
pub fn weighted_rigid_fit(pairs: &PointPairs, weights: &[f64]) -> Result<Pose2> {
    debug_assert_eq!(weights.len(), pairs.len());
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateGeometry("all weights are zero".into()));
    }
    let mut mu_s = Vector2::zeros();
    let mut mu_d = Vector2::zeros();
    for ((s, d), w) in pairs.src.iter().zip(&pairs.dst).zip(weights) {
        mu_s += s.coords * *w;
        mu_d += d.coords * *w;
    }
    mu_s /= total;
    mu_d /= total;

    let (mut dot, mut cross, mut spread) = (0.0, 0.0, 0.0);
    for ((s, d), w) in pairs.src.iter().zip(&pairs.dst).zip(weights) {
        let a = s.coords - mu_s;
        let b = d.coords - mu_d;
        dot += w * a.dot(&b);
        cross += w * (a.x * b.y - a.y * b.x);
        spread += w * a.norm_squared();
    }
    if spread <= 1e-24 * total {
        return Err(Error::DegenerateGeometry(
            "source points are coincident".into(),
        ));
    }
    let theta = cross.atan2(dot);
    let (sn, cs) = theta.sin_cos();
    let t = mu_d - Vector2::new(cs * mu_s.x - sn * mu_s.y, sn * mu_s.x + cs * mu_s.y);
    Ok(Pose2::new(t.x, t.y, theta))
}

/// Unweighted least-squares fit; the starting point of the robust solve and a
/// non-robust baseline.
pub fn least_squares_transform(pairs: &PointPairs) -> Result<Pose2> {
    weighted_rigid_fit(pairs, &vec![1.0; pairs.len()])
}

pub fn estimate_transform(pairs: &PointPairs, cfg: &EstimatorConfig) -> Result<TransformEstimate> {
    cfg.validate()?;
    let n = pairs.len();
    let mut pose = least_squares_transform(pairs)?;
    let mut weights = vec![1.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let (h, g) = normal_equations(pairs, &pose, cfg.huber_delta, &mut weights);
        let step = h
            .cholesky()
            .ok_or_else(|| Error::DegenerateGeometry("normal equations are singular".into()))?
            .solve(&(-g));
        pose = Pose2::new(pose.x() + step.x, pose.y() + step.y, pose.theta() + step.z);
        if step.norm() < cfg.tolerance {
            converged = true;
            break;
        }
    }

    let (h, _) = normal_equations(pairs, &pose, cfg.huber_delta, &mut weights);
    let eig = SymmetricEigen::new(h).eigenvalues;
    if eig.min() <= 1e-12 * eig.max().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateGeometry(
            "information matrix is rank deficient".into(),
        ));
    }
    let h_inv = h
        .try_inverse()
        .ok_or_else(|| Error::DegenerateGeometry("information matrix is singular".into()))?;

    let sigma = robust_scale(pairs, &pose, &weights);
    let mut covariance = h_inv * (sigma * sigma);
    covariance = (covariance + covariance.transpose()) * 0.5;

    Ok(TransformEstimate {
        transform: pose,
        covariance,
        inlier_weights: weights,
        iterations,
        converged,
        sigma,
    })
}

/// `JᵀWJ` and `JᵀWr` at `pose`; refreshes `weights` in place.
fn normal_equations(
    pairs: &PointPairs,
    pose: &Pose2,
    delta: f64,
    weights: &mut [f64],
) -> (Matrix3<f64>, Vector3<f64>) {
    let mut h = Matrix3::zeros();
    let mut g = Vector3::zeros();
    for (i, w) in weights.iter_mut().enumerate() {
        let r = pairs.residual(pose, i);
        *w = huber_weight(r.norm(), delta);
        let j = residual_jacobian(pose, &pairs.src[i]);
        h += j.transpose() * j * *w;
        g += j.transpose() * r * *w;
    }
    (h, g)
}

/// `1.4826 · median |r|` over residual components, each pair's two
/// components weighted by its robust weight.
fn robust_scale(pairs: &PointPairs, pose: &Pose2, weights: &[f64]) -> f64 {
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(2 * pairs.len());
    for (i, w) in weights.iter().enumerate() {
        let r = pairs.residual(pose, i);
        samples.push((r.x.abs(), *w));
        samples.push((r.y.abs(), *w));
    }
    MAD_TO_SIGMA * weighted_median(&mut samples)
}

fn weighted_median(samples: &mut [(f64, f64)]) -> f64 {
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let mut acc = 0.0;
    for &(v, w) in samples.iter() {
        acc += w;
        if acc >= 0.5 * total {
            return v;
        }
    }
    samples.last().map_or(0.0, |s| s.0)
}

/// `log₁₀` of the largest eigenvalue of a symmetric covariance.
pub fn covariance_score(sigma: &Matrix3<f64>) -> Result<f64> {
    let max = SymmetricEigen::new(*sigma).eigenvalues.max();
    if !(max > 0.0) {
        return Err(Error::NonPositiveCovariance(max));
    }
    Ok(max.log10())
}

/// Symmetrizes and raises every eigenvalue to at least `floor`.
pub fn regularize_covariance(sigma: &Matrix3<f64>, floor: f64) -> Matrix3<f64> {
    let sym = (sigma + sigma.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    for v in eig.eigenvalues.iter_mut() {
        *v = v.max(floor);
    }
    let r = eig.recompose();
    (r + r.transpose()) * 0.5
}
