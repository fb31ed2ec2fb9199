use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{half_cot_half, half_cot_half_derivative, normalize_angle, Pose2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Prior,
    Odometry,
    Loop,
}

/// Relative-pose constraint `measurement ≈ pose[from]⁻¹ · pose[to]`.
///
/// A prior has no `from` pose: its measurement is the absolute pose of `to`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    kind: FactorKind,
    from: Option<usize>,
    to: usize,
    measurement: Pose2,
    information: Matrix3<f64>,
}

impl Factor {
    pub fn prior(id: usize, pose: Pose2, information: Matrix3<f64>) -> Result<Self> {
        Self::build(FactorKind::Prior, None, id, pose, information)
    }

    pub fn odometry(from: usize, to: usize, measurement: Pose2, information: Matrix3<f64>) -> Result<Self> {
        Self::build(FactorKind::Odometry, Some(from), to, measurement, information)
    }

    pub fn loop_closure(
        from: usize,
        to: usize,
        measurement: Pose2,
        information: Matrix3<f64>,
    ) -> Result<Self> {
        if from.abs_diff(to) < 2 {
            return Err(Error::InvalidConfig(format!(
                "loop factor must join non-adjacent poses, got {from} and {to}"
            )));
        }
        Self::build(FactorKind::Loop, Some(from), to, measurement, information)
    }

    fn build(
        kind: FactorKind,
        from: Option<usize>,
        to: usize,
        measurement: Pose2,
        information: Matrix3<f64>,
    ) -> Result<Self> {
        let asym = (information - information.transpose()).abs().max();
        if !information.iter().all(|v| v.is_finite())
            || asym > 1e-9 * information.abs().max()
            || information.cholesky().is_none()
        {
            return Err(Error::InvalidConfig(
                "factor information must be symmetric positive-definite".into(),
            ));
        }
        if from == Some(to) {
            return Err(Error::InvalidConfig(format!("factor joins pose {to} to itself")));
        }
        Ok(Self {
            kind,
            from,
            to,
            measurement,
            information,
        })
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn from(&self) -> Option<usize> {
        self.from
    }

    pub fn to(&self) -> usize {
        self.to
    }

    pub fn measurement(&self) -> &Pose2 {
        &self.measurement
    }

    pub fn information(&self) -> &Matrix3<f64> {
        &self.information
    }

    /// `log(measurement⁻¹ · from⁻¹ · to)` with the angle wrapped.
    pub fn residual(&self, poses: &[Pose2]) -> Vector3<f64> {
        let from = self.from.map_or(Pose2::identity(), |i| poses[i]);
        self.linearize(&from, &poses[self.to]).0
    }

    /// `rᵀ Ω r`.
    pub fn cost(&self, poses: &[Pose2]) -> f64 {
        let r = self.residual(poses);
        r.dot(&(self.information * r))
    }

    /// Residual and its Jacobians with respect to `(x, y, θ)` of the `from`
    /// and `to` poses.
    pub(crate) fn linearize(&self, from: &Pose2, to: &Pose2) -> (Vector3<f64>, Matrix3<f64>, Matrix3<f64>) {
        let from_rot_t = from.rotation().transpose();
        let d = from_rot_t * (to.translation() - from.translation());
        let m_rot_t = self.measurement.rotation().transpose();
        let e_t = m_rot_t * (d - self.measurement.translation());
        let e_phi = normalize_angle(to.theta() - from.theta() - self.measurement.theta());

        let alpha = half_cot_half(e_phi);
        let d_alpha = half_cot_half_derivative(e_phi);
        let w = Matrix2::new(alpha, 0.5 * e_phi, -0.5 * e_phi, alpha);
        let dw = Matrix2::new(d_alpha, 0.5, -0.5, d_alpha);
        let rho = w * e_t;
        let residual = Vector3::new(rho.x, rho.y, e_phi);

        let a = w * m_rot_t;
        let b = dw * e_t;
        let dt = a * from_rot_t;
        let dtheta_from = a * Vector2::new(d.y, -d.x) - b;

        let mut j_to = Matrix3::zeros();
        j_to.fixed_view_mut::<2, 2>(0, 0).copy_from(&dt);
        j_to.fixed_view_mut::<2, 1>(0, 2).copy_from(&b);
        j_to[(2, 2)] = 1.0;

        let mut j_from = Matrix3::zeros();
        j_from.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-dt));
        j_from.fixed_view_mut::<2, 1>(0, 2).copy_from(&dtheta_from);
        j_from[(2, 2)] = -1.0;

        (residual, j_from, j_to)
    }
}

/// Converts an `(x, y, θ)` covariance of `measurement` into the information
/// matrix of the factor residual, raising eigenvalues to at least `floor`
/// first.
pub fn factor_information(covariance: &Matrix3<f64>, measurement: &Pose2, floor: f64) -> Matrix3<f64> {
    let mut a = Matrix3::identity();
    a.fixed_view_mut::<2, 2>(0, 0)
        .copy_from(&measurement.rotation().transpose());
    let tangent = crate::estimation::regularize_covariance(&(a * covariance * a.transpose()), floor);
    let info = tangent
        .try_inverse()
        .expect("regularized covariance is positive-definite");
    (info + info.transpose()) * 0.5
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub initial_lambda: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub relative_tolerance: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            initial_lambda: 1e-4,
            max_iterations: 100,
            relative_tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSummary {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// `false` when the iteration budget ran out; the best iterate is kept.
    pub converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoseGraph {
    poses: Vec<Pose2>,
    factors: Vec<Factor>,
}

impl PoseGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_pose(&mut self, pose: Pose2) -> usize {
        self.poses.push(pose);
        self.poses.len() - 1
    }

    pub fn add_factor(&mut self, factor: Factor) -> Result<()> {
        let n = self.poses.len();
        if factor.to >= n || factor.from.is_some_and(|i| i >= n) {
            return Err(Error::InvalidConfig("factor refers to an unknown pose".into()));
        }
        if factor.kind == FactorKind::Prior {
            if factor.to != 0 {
                return Err(Error::InvalidConfig("the prior must be on pose 0".into()));
            }
            if self.factors.iter().any(|f| f.kind == FactorKind::Prior) {
                return Err(Error::InvalidConfig("the graph already has a prior".into()));
            }
        }
        self.factors.push(factor);
        Ok(())
    }

    pub fn poses(&self) -> &[Pose2] {
        &self.poses
    }

    pub fn pose(&self, id: usize) -> Option<&Pose2> {
        self.poses.get(id)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn cost(&self) -> f64 {
        Self::cost_at(&self.factors, &self.poses)
    }

    fn cost_at(factors: &[Factor], poses: &[Pose2]) -> f64 {
        factors.iter().map(|f| f.cost(poses)).sum()
    }

    /// Levenberg–Marquardt over all poses. Steps that raise the cost are
    /// rejected, so the cost never increases.
    pub fn optimize(&mut self, cfg: &LmConfig) -> Result<OptimizationSummary> {
        if !self.factors.iter().any(|f| f.kind == FactorKind::Prior) {
            return Err(Error::InvalidConfig("pose graph has no prior".into()));
        }
        let n = 3 * self.poses.len();
        let initial_cost = self.cost();
        let mut cost = initial_cost;
        let mut lambda = cfg.initial_lambda;
        let mut iterations = 0;
        let mut converged = cost <= f64::MIN_POSITIVE;

        while !converged && iterations < cfg.max_iterations {
            iterations += 1;
            let (h, g) = self.normal_equations(n);
            let mut accepted = false;
            while !accepted && lambda < 1e16 {
                let mut damped = h.clone();
                for k in 0..n {
                    damped[(k, k)] += lambda * h[(k, k)].max(1e-12);
                }
                let Some(chol) = damped.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let step = chol.solve(&(-&g));
                let candidate: Vec<Pose2> = self
                    .poses
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        Pose2::new(p.x() + step[3 * i], p.y() + step[3 * i + 1], p.theta() + step[3 * i + 2])
                    })
                    .collect();
                let new_cost = Self::cost_at(&self.factors, &candidate);
                if new_cost <= cost {
                    let decrease = (cost - new_cost) / cost.max(f64::MIN_POSITIVE);
                    self.poses = candidate;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if decrease < cfg.relative_tolerance || cost <= f64::MIN_POSITIVE {
                        converged = true;
                    }
                } else {
                    lambda *= 10.0;
                }
            }
            if !accepted {
                // No damping level reduces the cost: already at a minimum.
                converged = true;
            }
        }

        Ok(OptimizationSummary {
            iterations,
            initial_cost,
            final_cost: cost,
            converged,
        })
    }

    /// Gauss–Newton system `H = Σ JᵀΩJ`, `g = Σ JᵀΩr`.
    fn normal_equations(&self, n: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut h = DMatrix::zeros(n, n);
        let mut g = DVector::zeros(n);
        for f in &self.factors {
            let from = f.from.map_or(Pose2::identity(), |i| self.poses[i]);
            let (r, j_from, j_to) = f.linearize(&from, &self.poses[f.to]);
            let omega = &f.information;
            let mut blocks = vec![(f.to, j_to)];
            if let Some(i) = f.from {
                blocks.push((i, j_from));
            }
            for &(a, ja) in &blocks {
                let ja_t_omega = ja.transpose() * omega;
                let mut ga = g.fixed_rows_mut::<3>(3 * a);
                ga += ja_t_omega * r;
                for &(b, jb) in &blocks {
                    let mut hab = h.fixed_view_mut::<3, 3>(3 * a, 3 * b);
                    hab += ja_t_omega * jb;
                }
            }
        }
        (h, g)
    }
}
