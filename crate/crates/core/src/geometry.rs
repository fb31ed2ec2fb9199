//! SE(2) poses and the pixel → camera → robot ground-plane projection chain.
//!
//! A pixel `(u, v)` is lifted to the camera frame as `K⁻¹ (u, v, 1)ᵀ · d`,
//! where `d` is the camera-to-ground distance along the optical axis, then
//! mapped into the robot frame with the 4×4 camera-to-robot transform. The
//! resulting Z component must vanish (the point lies on the ground plane) and
//! is dropped.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use nalgebra::{Matrix2, Matrix3, Matrix3xX, Matrix4, Point2, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest |Z| (meters) tolerated when dropping the Z component of a
/// robot-frame point.
pub const PLANARITY_TOLERANCE: f64 = 1e-9;

/// Wraps an angle to `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Planar rigid pose `(x, y, θ)`. `θ` is always kept in `(-π, π]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseRepr", into = "PoseRepr")]
pub struct Pose2 {
    x: f64,
    y: f64,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    x: f64,
    y: f64,
    theta: f64,
}

impl From<PoseRepr> for Pose2 {
    fn from(r: PoseRepr) -> Self {
        Pose2::new(r.x, r.y, r.theta)
    }
}

impl From<Pose2> for PoseRepr {
    fn from(p: Pose2) -> Self {
        PoseRepr {
            x: p.x,
            y: p.y,
            theta: p.theta,
        }
    }
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Display for Pose2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6} rad)", self.x, self.y, self.theta)
    }
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    /// `self ∘ other`, i.e. the matrix product `T_self · T_other`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Pose of `other` expressed in the frame of `self`: `self⁻¹ ∘ other`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }

    pub fn transform_point(&self, p: &Point2<f64>) -> Point2<f64> {
        let (s, c) = self.theta.sin_cos();
        Point2::new(
            self.x + c * p.x - s * p.y,
            self.y + s * p.x + c * p.y,
        )
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix3::new(c, -s, self.x, s, c, self.y, 0.0, 0.0, 1.0)
    }

    /// Reads a homogeneous SE(2) matrix. The rotation block is assumed
    /// orthonormal; only its first column is used for the angle.
    pub fn from_matrix(m: &Matrix3<f64>) -> Pose2 {
        Pose2::new(m[(0, 2)], m[(1, 2)], m[(1, 0)].atan2(m[(0, 0)]))
    }

    /// SE(2) logarithm: tangent vector `(ρ, φ)` with `exp(ρ, φ) = self`.
    pub fn log(&self) -> Vector3<f64> {
        let phi = self.theta;
        let v_inv = left_jacobian_inverse(phi);
        let rho = v_inv * self.translation();
        Vector3::new(rho.x, rho.y, phi)
    }

    pub fn exp(tangent: &Vector3<f64>) -> Pose2 {
        let phi = tangent.z;
        let (a, b) = if phi.abs() < 1e-8 {
            (1.0 - phi * phi / 6.0, phi / 2.0)
        } else {
            (phi.sin() / phi, (1.0 - phi.cos()) / phi)
        };
        let v = Matrix2::new(a, -b, b, a);
        let t = v * Vector2::new(tangent.x, tangent.y);
        Pose2::new(t.x, t.y, phi)
    }
}

/// `(φ/2)·cot(φ/2)`, the diagonal entry of the inverse SE(2) left Jacobian.
pub(crate) fn half_cot_half(phi: f64) -> f64 {
    if phi.abs() < 1e-4 {
        let p2 = phi * phi;
        1.0 - p2 / 12.0 - p2 * p2 / 720.0
    } else {
        let h = 0.5 * phi;
        h * h.cos() / h.sin()
    }
}

/// Derivative of [`half_cot_half`] with respect to `φ`.
pub(crate) fn half_cot_half_derivative(phi: f64) -> f64 {
    if phi.abs() < 1e-4 {
        -phi / 6.0 - phi * phi * phi / 180.0
    } else {
        let h = 0.5 * phi;
        let s = h.sin();
        0.5 * (h.cos() / s - h / (s * s))
    }
}

fn left_jacobian_inverse(phi: f64) -> Matrix2<f64> {
    let a = half_cot_half(phi);
    let b = 0.5 * phi;
    Matrix2::new(a, b, -b, a)
}

/// Homogeneous pixel coordinates, one column `(u, v, 1)` per keypoint.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelPoints(Matrix3xX<f64>);

impl PixelPoints {
    pub fn from_pixels<I>(pixels: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let pixels: Vec<(f64, f64)> = pixels.into_iter().collect();
        let mut m = Matrix3xX::zeros(pixels.len());
        for (i, (u, v)) in pixels.into_iter().enumerate() {
            m[(0, i)] = u;
            m[(1, i)] = v;
            m[(2, i)] = 1.0;
        }
        Self(m)
    }

    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }

    pub fn homogeneous(&self) -> &Matrix3xX<f64> {
        &self.0
    }

    pub fn pixel(&self, i: usize) -> (f64, f64) {
        (self.0[(0, i)], self.0[(1, i)])
    }
}

/// Metric points in the camera frame, one column per keypoint.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraPoints(pub Matrix3xX<f64>);

impl CameraPoints {
    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }
}

/// Metric 2-D points in the robot frame on the ground plane.
pub type GroundPoints = Vec<Point2<f64>>;

/// Calibrated pinhole camera rigidly mounted on the robot.
///
/// The camera-to-ground distance `d` is derived once from `camera_to_robot`
/// as the depth, along the optical axis, at which that axis meets the ground
/// plane `Z = 0` of the robot frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraModel {
    intrinsics: Matrix3<f64>,
    intrinsics_inv: Matrix3<f64>,
    camera_to_robot: Matrix4<f64>,
    robot_to_camera: Matrix4<f64>,
    ground_distance: f64,
    width: u32,
    height: u32,
}

impl CameraModel {
    pub fn new(
        intrinsics: Matrix3<f64>,
        camera_to_robot: Matrix4<f64>,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        if intrinsics.row(2) != Matrix3::<f64>::identity().row(2) {
            return Err(Error::InvalidCamera(
                "last row of K must be (0, 0, 1)".into(),
            ));
        }
        let intrinsics_inv = intrinsics
            .try_inverse()
            .filter(|_| intrinsics.determinant().abs() > 1e-12)
            .ok_or_else(|| Error::InvalidCamera("K is singular".into()))?;
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera("image size must be positive".into()));
        }

        let bottom = camera_to_robot.row(3);
        if bottom[0] != 0.0 || bottom[1] != 0.0 || bottom[2] != 0.0 || bottom[3] != 1.0 {
            return Err(Error::InvalidCamera(
                "T_RC bottom row must be (0, 0, 0, 1)".into(),
            ));
        }
        let rotation = camera_to_robot.fixed_view::<3, 3>(0, 0).into_owned();
        let orthonormality = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if orthonormality > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidCamera(
                "T_RC rotation block is not a proper rotation".into(),
            ));
        }

        let optical_axis = rotation.column(2);
        let height_above_ground = camera_to_robot[(2, 3)];
        if optical_axis.z >= -1e-12 {
            return Err(Error::InvalidCamera(
                "optical axis does not point towards the ground".into(),
            ));
        }
        let ground_distance = height_above_ground / -optical_axis.z;
        if !(ground_distance > 0.0) {
            return Err(Error::InvalidCamera(format!(
                "derived ground distance {ground_distance} m is not positive"
            )));
        }

        let robot_to_camera = camera_to_robot
            .try_inverse()
            .ok_or_else(|| Error::InvalidCamera("T_RC is singular".into()))?;

        Ok(Self {
            intrinsics,
            intrinsics_inv,
            camera_to_robot,
            robot_to_camera,
            ground_distance,
            width,
            height,
        })
    }

    /// Camera `height` meters above the robot origin looking straight down.
    /// Image +x maps to robot `(cos yaw, sin yaw)`.
    #[allow(clippy::too_many_arguments)]
    pub fn nadir(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        height: f64,
        yaw: f64,
        width: u32,
        image_height: u32,
    ) -> Result<Self> {
        let k = Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0);
        Self::new(k, nadir_mount(height, yaw), width, image_height)
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn camera_to_robot(&self) -> &Matrix4<f64> {
        &self.camera_to_robot
    }

    pub fn ground_distance(&self) -> f64 {
        self.ground_distance
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Extent of the image footprint on the ground (meters), measured as the
    /// back-projected image diagonal.
    pub fn footprint_diagonal(&self) -> Result<f64> {
        let corners = PixelPoints::from_pixels([
            (0.0, 0.0),
            (self.width as f64, self.height as f64),
        ]);
        let g = project_keypoints(&corners, self)?;
        Ok((g[1] - g[0]).norm())
    }

    /// Forward model: robot-frame ground point → pixel. Returns `None` when
    /// the point is behind the camera.
    pub fn ground_to_pixel(&self, p: &Point2<f64>) -> Option<(f64, f64)> {
        let c = self.robot_to_camera * Vector4::new(p.x, p.y, 0.0, 1.0);
        if c.z <= 0.0 {
            return None;
        }
        let uvw = self.intrinsics * Vector3::new(c.x / c.z, c.y / c.z, 1.0);
        Some((uvw.x, uvw.y))
    }

    /// Parses the plain-text camera configuration (see [`CameraModel::to_config_string`]).
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut fx = None;
        let mut fy = None;
        let mut cx = None;
        let mut cy = None;
        let mut width = None;
        let mut height = None;
        let mut t_rc = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidCamera(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let scalar = |v: &str| -> Result<f64> {
                v.parse::<f64>().map_err(|_| {
                    Error::InvalidCamera(format!("line {}: bad number `{v}`", lineno + 1))
                })
            };
            match key {
                "fx" => fx = Some(scalar(value)?),
                "fy" => fy = Some(scalar(value)?),
                "cx" => cx = Some(scalar(value)?),
                "cy" => cy = Some(scalar(value)?),
                "width" => width = Some(scalar(value)? as u32),
                "height" => height = Some(scalar(value)? as u32),
                "T_RC" => {
                    let entries = value
                        .split_whitespace()
                        .map(scalar)
                        .collect::<Result<Vec<f64>>>()?;
                    if entries.len() != 16 {
                        return Err(Error::InvalidCamera(format!(
                            "line {}: T_RC needs 16 entries, got {}",
                            lineno + 1,
                            entries.len()
                        )));
                    }
                    t_rc = Some(Matrix4::from_row_slice(&entries));
                }
                other => {
                    return Err(Error::InvalidCamera(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }

        let missing = |name: &str| Error::InvalidCamera(format!("missing key `{name}`"));
        let fx = fx.ok_or_else(|| missing("fx"))?;
        let fy = fy.ok_or_else(|| missing("fy"))?;
        let cx = cx.ok_or_else(|| missing("cx"))?;
        let cy = cy.ok_or_else(|| missing("cy"))?;
        let t_rc = t_rc.ok_or_else(|| missing("T_RC"))?;
        let width = width.unwrap_or((2.0 * cx).round() as u32);
        let height = height.unwrap_or((2.0 * cy).round() as u32);
        let k = Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0);
        Self::new(k, t_rc, width, height)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    /// Serializes to the key-value camera format. Numbers use Rust's
    /// shortest round-trip formatting, so parsing the output is lossless.
    /// Skew in `K` is not representable and is dropped.
    pub fn to_config_string(&self) -> String {
        let k = &self.intrinsics;
        let mut out = String::new();
        out.push_str(&format!("fx = {}\n", k[(0, 0)]));
        out.push_str(&format!("fy = {}\n", k[(1, 1)]));
        out.push_str(&format!("cx = {}\n", k[(0, 2)]));
        out.push_str(&format!("cy = {}\n", k[(1, 2)]));
        out.push_str(&format!("width = {}\n", self.width));
        out.push_str(&format!("height = {}\n", self.height));
        let entries: Vec<String> = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| format!("{}", self.camera_to_robot[(r, c)]))
            .collect();
        out.push_str(&format!("T_RC = {}\n", entries.join(" ")));
        out
    }
}

/// `T_RC` for a camera `height` meters above the robot origin, optical axis
/// pointing down, image x axis along robot heading rotated by `yaw`.
pub fn nadir_mount(height: f64, yaw: f64) -> Matrix4<f64> {
    let (s, c) = yaw.sin_cos();
    // Rz(yaw) · diag(1, -1, -1)
    Matrix4::new(
        c, s, 0.0, 0.0, //
        s, -c, 0.0, 0.0, //
        0.0, 0.0, -1.0, height, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// `z_C = K⁻¹ · z_I · d`. The homogeneous 1 becomes the Z component `d`.
pub fn pixels_to_camera(pts: &PixelPoints, cam: &CameraModel) -> CameraPoints {
    CameraPoints(cam.intrinsics_inv * pts.homogeneous() * cam.ground_distance)
}

/// `z_R = T_RC · z_C`, dropping Z after checking it is (numerically) zero.
pub fn camera_to_ground(pts: &CameraPoints, cam: &CameraModel) -> Result<GroundPoints> {
    let r = cam.camera_to_robot.fixed_view::<3, 3>(0, 0);
    let t = cam.camera_to_robot.fixed_view::<3, 1>(0, 3);
    pts.0
        .column_iter()
        .enumerate()
        .map(|(index, c)| {
            let p = r * c + t;
            if p.z.abs() >= PLANARITY_TOLERANCE {
                Err(Error::Planarity { index, z: p.z.abs() })
            } else {
                Ok(Point2::new(p.x, p.y))
            }
        })
        .collect()
}

pub fn project_keypoints(pts: &PixelPoints, cam: &CameraModel) -> Result<GroundPoints> {
    camera_to_ground(&pixels_to_camera(pts, cam), cam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn assert_pose(p: Pose2, x: f64, y: f64, theta: f64) {
        assert_relative_eq!(p.x(), x, epsilon = 1e-12);
        assert_relative_eq!(p.y(), y, epsilon = 1e-12);
        assert_relative_eq!(p.theta(), theta, epsilon = 1e-12);
    }

    fn test_k() -> Matrix3<f64> {
        Matrix3::new(100.0, 0.0, 320.0, 0.0, 100.0, 240.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn compose_examples() {
        let p = Pose2::identity().compose(&Pose2::new(1.0, 2.0, 0.3));
        assert_pose(p, 1.0, 2.0, 0.3);

        let p = Pose2::new(1.0, 0.0, PI / 2.0).compose(&Pose2::new(1.0, 0.0, 0.0));
        assert_pose(p, 1.0, 1.0, PI / 2.0);

        let a = Pose2::new(0.5, -0.2, 0.4);
        assert_pose(a.compose(&a.inverse()), 0.0, 0.0, 0.0);
    }

    #[test]
    fn angle_normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert_relative_eq!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(normalize_angle(-7.0), -7.0 + 2.0 * PI, epsilon = 1e-15);
        assert_eq!(Pose2::new(0.0, 0.0, 2.0 * PI).theta(), 0.0);
    }

    #[test]
    fn pixels_to_camera_examples() {
        let mount = nadir_mount(0.1, 0.0);
        let cam = CameraModel::new(test_k(), mount, 640, 480).unwrap();
        let c = pixels_to_camera(&PixelPoints::from_pixels([(320.0, 240.0), (420.0, 240.0)]), &cam);
        assert_relative_eq!(c.0.column(0).into_owned(), Vector3::new(0.0, 0.0, 0.1), epsilon = 1e-15);
        assert_relative_eq!(c.0.column(1).into_owned(), Vector3::new(0.1, 0.0, 0.1), epsilon = 1e-15);

        let cam = CameraModel::new(test_k(), nadir_mount(0.2, 0.0), 640, 480).unwrap();
        let c = pixels_to_camera(&PixelPoints::from_pixels([(320.0, 140.0)]), &cam);
        assert_relative_eq!(c.0.column(0).into_owned(), Vector3::new(0.0, -0.2, 0.2), epsilon = 1e-15);
    }

    #[test]
    fn camera_to_ground_examples() {
        let cam = CameraModel::new(test_k(), nadir_mount(0.1, 0.0), 640, 480).unwrap();
        let pts = CameraPoints(Matrix3xX::from_columns(&[
            Vector3::new(0.0, 0.0, 0.1),
            Vector3::new(0.05, 0.0, 0.1),
        ]));
        let g = camera_to_ground(&pts, &cam).unwrap();
        assert_relative_eq!(g[0], Point2::new(0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(g[1], Point2::new(0.05, 0.0), epsilon = 1e-15);

        // Rz(90°)·diag(1,-1,-1) with the camera 0.1 m up, multiplied out by hand.
        #[rustfmt::skip]
        let yawed = Matrix4::new(
            0.0, 1.0,  0.0, 0.0,
            1.0, 0.0,  0.0, 0.0,
            0.0, 0.0, -1.0, 0.1,
            0.0, 0.0,  0.0, 1.0,
        );
        let cam = CameraModel::new(test_k(), yawed, 640, 480).unwrap();
        let pts = CameraPoints(Matrix3xX::from_columns(&[Vector3::new(0.05, 0.0, 0.1)]));
        let g = camera_to_ground(&pts, &cam).unwrap();
        assert_relative_eq!(g[0], Point2::new(0.0, 0.05), epsilon = 1e-15);
        assert_relative_eq!(nadir_mount(0.1, PI / 2.0), yawed, epsilon = 1e-15);
    }

    #[test]
    fn planarity_violation_is_reported() {
        let cam = CameraModel::new(test_k(), nadir_mount(0.1, 0.0), 640, 480).unwrap();
        // A point 1 cm above the ground plane.
        let pts = CameraPoints(Matrix3xX::from_columns(&[Vector3::new(0.0, 0.0, 0.09)]));
        assert!(matches!(
            camera_to_ground(&pts, &cam),
            Err(Error::Planarity { index: 0, .. })
        ));
    }

    #[test]
    fn project_keypoints_composes_both_steps() {
        let cam = CameraModel::new(test_k(), nadir_mount(0.1, 0.0), 640, 480).unwrap();
        let g = project_keypoints(
            &PixelPoints::from_pixels([(320.0, 240.0), (420.0, 240.0), (320.0, 140.0)]),
            &cam,
        )
        .unwrap();
        assert_relative_eq!(g[0], Point2::new(0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(g[1], Point2::new(0.1, 0.0), epsilon = 1e-15);
        // image y down maps to robot -y for this mount
        assert_relative_eq!(g[2], Point2::new(0.0, 0.1), epsilon = 1e-15);
    }

    #[test]
    fn camera_validation() {
        let mut k = test_k();
        k[(2, 0)] = 0.1;
        assert!(CameraModel::new(k, nadir_mount(0.1, 0.0), 640, 480).is_err());

        let mut singular = test_k();
        singular[(0, 0)] = 0.0;
        assert!(CameraModel::new(singular, nadir_mount(0.1, 0.0), 640, 480).is_err());

        // camera looking up
        let up = Matrix4::new_translation(&Vector3::new(0.0, 0.0, 0.1));
        assert!(CameraModel::new(test_k(), up, 640, 480).is_err());

        // below the ground
        assert!(CameraModel::new(test_k(), nadir_mount(-0.1, 0.0), 640, 480).is_err());
    }

    #[test]
    fn derived_distance_follows_optical_axis() {
        let cam = CameraModel::new(test_k(), nadir_mount(0.3, 1.0), 640, 480).unwrap();
        assert_relative_eq!(cam.ground_distance(), 0.3, epsilon = 1e-15);

        // Tilt by 10° about the camera x axis: the axis hits the ground at
        // depth h / cos(10°).
        let tilt = 10f64.to_radians();
        let rx = Matrix4::from_euler_angles(tilt, 0.0, 0.0);
        let cam = CameraModel::new(test_k(), nadir_mount(0.3, 0.0) * rx, 640, 480).unwrap();
        assert_relative_eq!(cam.ground_distance(), 0.3 / tilt.cos(), epsilon = 1e-12);
    }

    #[test]
    fn config_round_trip() {
        let cam = CameraModel::nadir(401.5, 399.25, 240.5, 239.75, 0.25, 0.3, 480, 480).unwrap();
        let text = cam.to_config_string();
        let back = CameraModel::from_config_str(&text).unwrap();
        assert_eq!(cam, back);
    }

    #[test]
    fn config_parse_errors() {
        assert!(CameraModel::from_config_str("fx = 1\nfy = 1\ncx = 1\n").is_err());
        assert!(CameraModel::from_config_str("fx = 1\nbogus = 2\n").is_err());
        let short = "fx = 100\nfy = 100\ncx = 50\ncy = 50\nT_RC = 1 0 0 0\n";
        assert!(CameraModel::from_config_str(short).is_err());
        let ok = "# comment\nfx = 100\nfy = 100\ncx = 50\ncy = 50\n\
                  T_RC = 1 0 0 0 0 -1 0 0 0 0 -1 0.2 0 0 0 1  # down\n";
        let cam = CameraModel::from_config_str(ok).unwrap();
        assert_eq!((cam.width(), cam.height()), (100, 100));
        assert_relative_eq!(cam.ground_distance(), 0.2);
    }

    #[test]
    fn log_exp_round_trip() {
        for p in [
            Pose2::new(0.3, -0.2, 0.0),
            Pose2::new(1.0, 2.0, 3.0),
            Pose2::new(-0.1, 0.05, -2.5),
            Pose2::new(0.0, 0.0, 1e-9),
        ] {
            let back = Pose2::exp(&p.log());
            assert_relative_eq!(back.as_vector(), p.as_vector(), epsilon = 1e-12);
        }
    }

    fn pose_strategy() -> impl Strategy<Value = Pose2> {
        (-10.0..10.0f64, -10.0..10.0f64, -PI..PI).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(a in pose_strategy()) {
            let id = a.compose(&a.inverse());
            prop_assert!(id.x().abs() < 1e-12 && id.y().abs() < 1e-12 && id.theta().abs() < 1e-12);
        }

        #[test]
        fn compose_matches_matrix_product(a in pose_strategy(), b in pose_strategy()) {
            let m = a.to_matrix() * b.to_matrix();
            let c = a.compose(&b);
            prop_assert!((c.to_matrix() - m).amax() < 1e-12);
            prop_assert!(c.theta() > -PI && c.theta() <= PI);
        }

        #[test]
        fn matrix_round_trip(a in pose_strategy()) {
            let back = Pose2::from_matrix(&a.to_matrix());
            prop_assert!((back.as_vector() - a.as_vector()).amax() < 1e-12);
        }

        #[test]
        fn rigid_motion_preserves_distances(
            g in pose_strategy(),
            pts in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2..20),
        ) {
            let pts: Vec<Point2<f64>> = pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
            let moved: Vec<Point2<f64>> = pts.iter().map(|p| g.transform_point(p)).collect();
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    let d0 = (pts[i] - pts[j]).norm();
                    let d1 = (moved[i] - moved[j]).norm();
                    prop_assert!((d0 - d1).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn projection_is_affine(
            yaw in -PI..PI,
            pix in proptest::collection::vec((20.0..620.0f64, 20.0..460.0f64), 1..12),
        ) {
            let cam = CameraModel::new(test_k(), nadir_mount(0.17, yaw), 640, 480).unwrap();
            let n = pix.len() as f64;
            let mean = pix.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / n, acc.1 + p.1 / n));
            let g = project_keypoints(&PixelPoints::from_pixels(pix.iter().copied()), &cam).unwrap();
            let gm = project_keypoints(&PixelPoints::from_pixels([mean]), &cam).unwrap()[0];
            let avg = g.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords / n);
            prop_assert!((gm.coords - avg).norm() < 1e-12);
        }

        #[test]
        fn forward_model_inverts_projection(
            yaw in -PI..PI,
            u in 0.0..640.0f64,
            v in 0.0..480.0f64,
        ) {
            let cam = CameraModel::new(test_k(), nadir_mount(0.2, yaw), 640, 480).unwrap();
            let g = project_keypoints(&PixelPoints::from_pixels([(u, v)]), &cam).unwrap()[0];
            let (u2, v2) = cam.ground_to_pixel(&g).unwrap();
            prop_assert!((u - u2).abs() < 1e-9 && (v - v2).abs() < 1e-9);
        }
    }
}
