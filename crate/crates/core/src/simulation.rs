//! Seeded landmark worlds, trajectories and rendered observations with exact
//! ground truth.
//!
//! A world is a set of ground landmarks, each carrying a random binary
//! descriptor. Rendering maps every landmark inside the camera footprint to
//! pixels through the camera model, applies the requested noise and projects
//! the pixels back to the ground exactly as the pipeline does.

use std::f64::consts::PI;
use std::path::Path;

use image::{GrayImage, Luma};
use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Descriptor, FeatureSet};
use crate::geometry::{project_keypoints, CameraModel, PixelPoints, Pose2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Extent {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    /// Bounding box of `poses` grown by `margin` on every side.
    pub fn around(poses: &[Pose2], margin: f64) -> Self {
        let mut e = Self::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in poses {
            e.min_x = e.min_x.min(p.x() - margin);
            e.min_y = e.min_y.min(p.y() - margin);
            e.max_x = e.max_x.max(p.x() + margin);
            e.max_y = e.max_y.max(p.y() + margin);
        }
        e
    }

    pub fn area(&self) -> f64 {
        (self.max_x - self.min_x).max(0.0) * (self.max_y - self.min_y).max(0.0)
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        (self.min_x..=self.max_x).contains(&p.x) && (self.min_y..=self.max_y).contains(&p.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Landmark {
    pub position: Point2<f64>,
    pub descriptor: Descriptor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkWorld {
    pub landmarks: Vec<Landmark>,
    pub extent: Extent,
    /// Landmarks per square meter.
    pub density: f64,
    pub seed: u64,
}

/// Uniform scatter of `⌈density · area⌉` landmarks with i.i.d. random
/// descriptors.
pub fn generate_world(extent: Extent, density: f64, seed: u64) -> Result<LandmarkWorld> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::InvalidConfig(format!("density must be > 0, got {density}")));
    }
    let area = extent.area();
    if !(area > 0.0 && area.is_finite()) {
        return Err(Error::InvalidConfig("world extent has zero area".into()));
    }
    let count = (density * area - 1e-9).ceil().max(1.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let landmarks = (0..count)
        .map(|_| Landmark {
            position: Point2::new(
                rng.random_range(extent.min_x..extent.max_x),
                rng.random_range(extent.min_y..extent.max_y),
            ),
            descriptor: Descriptor::random(&mut rng),
        })
        .collect();
    Ok(LandmarkWorld {
        landmarks,
        extent,
        density,
        seed,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation of the Gaussian added to each pixel coordinate.
    pub pixel_sigma: f64,
    /// Independent flip probability of every descriptor bit.
    pub descriptor_flip_prob: f64,
    /// Fraction of features whose descriptor is replaced by that of another
    /// visible landmark.
    pub outlier_rate: f64,
    /// Fraction of visible landmarks left out of the observation.
    pub dropout_rate: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_sigma >= 0.0 && self.pixel_sigma.is_finite()) {
            return Err(Error::InvalidConfig("pixel_sigma must be ≥ 0".into()));
        }
        for (name, p) in [
            ("descriptor_flip_prob", self.descriptor_flip_prob),
            ("outlier_rate", self.outlier_rate),
            ("dropout_rate", self.dropout_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// One rendered view.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// Noisy pixel position of every feature.
    pub pixels: Vec<(f64, f64)>,
    /// Index of the landmark each feature was rendered from.
    pub landmark_ids: Vec<usize>,
    /// Whether the feature's descriptor belongs to a different landmark.
    pub outlier: Vec<bool>,
    pub features: FeatureSet,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Renders the landmarks visible from `pose`. Visibility means the
/// noise-free pixel falls inside the image.
pub fn render_observation(
    world: &LandmarkWorld,
    pose: &Pose2,
    cam: &CameraModel,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<Observation> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (cam.width() as f64, cam.height() as f64);
    let to_robot = pose.inverse();

    let mut visible: Vec<(usize, (f64, f64))> = Vec::new();
    for (i, lm) in world.landmarks.iter().enumerate() {
        let p = to_robot.transform_point(&lm.position);
        if let Some((u, v)) = cam.ground_to_pixel(&p) {
            if (0.0..w).contains(&u) && (0.0..h).contains(&v) {
                visible.push((i, (u, v)));
            }
        }
    }

    if noise.dropout_rate > 0.0 {
        visible.retain(|_| !rng.random_bool(noise.dropout_rate));
    }

    let pixel_noise = (noise.pixel_sigma > 0.0)
        .then(|| Normal::new(0.0, noise.pixel_sigma).expect("validated sigma"));
    let mut pixels = Vec::with_capacity(visible.len());
    let mut descriptors = Vec::with_capacity(visible.len());
    let mut outlier = Vec::with_capacity(visible.len());
    for &(i, (u, v)) in &visible {
        let (du, dv) = match &pixel_noise {
            Some(n) => (n.sample(&mut rng), n.sample(&mut rng)),
            None => (0.0, 0.0),
        };
        pixels.push((u + du, v + dv));

        let mut d = world.landmarks[i].descriptor;
        let mut is_outlier = false;
        if visible.len() > 1 && noise.outlier_rate > 0.0 && rng.random_bool(noise.outlier_rate) {
            let other = loop {
                let j = visible[rng.random_range(0..visible.len())].0;
                if j != i {
                    break j;
                }
            };
            d = world.landmarks[other].descriptor;
            is_outlier = true;
        }
        if noise.descriptor_flip_prob > 0.0 {
            for bit in 0..Descriptor::BITS as usize {
                if rng.random_bool(noise.descriptor_flip_prob) {
                    d.flip_bit(bit);
                }
            }
        }
        descriptors.push(d);
        outlier.push(is_outlier);
    }

    let ground = project_keypoints(&PixelPoints::from_pixels(pixels.iter().copied()), cam)?;
    Ok(Observation {
        pixels,
        landmark_ids: visible.iter().map(|v| v.0).collect(),
        outlier,
        features: FeatureSet::new(ground, descriptors)?,
    })
}

/// Dot-pattern grayscale image of an observation: a bright Gaussian dot on
/// a dark background at every feature pixel.
pub fn rasterize(obs: &Observation, width: u32, height: u32) -> GrayImage {
    let mut acc = vec![0f32; (width * height) as usize];
    let sigma = 1.2f32;
    let r = 4i64;
    for &(u, v) in &obs.pixels {
        let (cu, cv) = (u.round() as i64, v.round() as i64);
        for y in (cv - r).max(0)..=(cv + r).min(height as i64 - 1) {
            for x in (cu - r).max(0)..=(cu + r).min(width as i64 - 1) {
                let dx = x as f32 - u as f32;
                let dy = y as f32 - v as f32;
                acc[(y as u32 * width + x as u32) as usize] += (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    GrayImage::from_fn(width, height, |x, y| {
        let a = acc[(y * width + x) as usize].min(1.0);
        Luma([(40.0 + 200.0 * a).round() as u8])
    })
}

/// Poses every `step` meters along the polyline through `waypoints`, heading
/// along the direction of travel. A closed polyline (last waypoint equal to
/// the first) stops one step short of the start so the start is revisited,
/// not duplicated; an open one ends exactly on its last waypoint.
pub fn generate_trajectory(waypoints: &[Point2<f64>], step: f64) -> Result<Vec<Pose2>> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidConfig("a trajectory needs at least 2 waypoints".into()));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(format!("step must be > 0, got {step}")));
    }
    let segments: Vec<(Point2<f64>, Vector2<f64>, f64)> = waypoints
        .windows(2)
        .filter_map(|w| {
            let d = w[1] - w[0];
            let len = d.norm();
            (len > 0.0).then(|| (w[0], d / len, len))
        })
        .collect();
    if segments.is_empty() {
        return Err(Error::InvalidConfig("trajectory has zero length".into()));
    }
    let total: f64 = segments.iter().map(|s| s.2).sum();
    let closed = (waypoints[0] - waypoints[waypoints.len() - 1]).norm() < 1e-12;
    let eps = 1e-9 * total.max(1.0);

    let mut poses = Vec::new();
    let mut k = 0usize;
    loop {
        let s = k as f64 * step;
        if s > total - eps {
            break;
        }
        let mut offset = s;
        let mut seg = segments.len() - 1;
        for (i, sg) in segments.iter().enumerate() {
            if offset < sg.2 - eps {
                seg = i;
                break;
            }
            offset -= sg.2;
        }
        let (start, dir, _) = segments[seg];
        let p = start + dir * offset.max(0.0);
        poses.push(Pose2::new(p.x, p.y, dir.y.atan2(dir.x)));
        k += 1;
    }
    if !closed {
        let (start, dir, len) = *segments.last().expect("non-empty");
        let end = start + dir * len;
        poses.push(Pose2::new(end.x, end.y, dir.y.atan2(dir.x)));
    }
    Ok(poses)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "shape")]
pub enum TrajectoryShape {
    /// Straight segment along +x.
    Line { length: f64 },
    /// Closed counter-clockwise square starting at the origin.
    Square { side: f64 },
    /// Two square lobes of side `size` traversed so the path crosses itself
    /// at the origin and returns there.
    FigureEight { size: f64 },
    Waypoints { points: Vec<[f64; 2]> },
}

impl TrajectoryShape {
    pub fn waypoints(&self) -> Vec<Point2<f64>> {
        let pts: Vec<[f64; 2]> = match self {
            Self::Line { length } => vec![[0.0, 0.0], [*length, 0.0]],
            Self::Square { side: s } => vec![[0.0, 0.0], [*s, 0.0], [*s, *s], [0.0, *s], [0.0, 0.0]],
            Self::FigureEight { size: s } => vec![
                [0.0, 0.0],
                [*s, 0.0],
                [*s, *s],
                [0.0, *s],
                [0.0, -s],
                [-s, -s],
                [-s, 0.0],
                [0.0, 0.0],
            ],
            Self::Waypoints { points } => points.clone(),
        };
        pts.iter().map(|p| Point2::new(p[0], p[1])).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Height of the camera above the ground, meters.
    pub mount_height: f64,
    /// Rotation of the image x-axis from the robot x-axis, radians.
    pub yaw: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            fx: 400.0,
            fy: 400.0,
            cx: 240.0,
            cy: 240.0,
            width: 480,
            height: 480,
            mount_height: 0.25,
            yaw: 0.0,
        }
    }
}

impl CameraSpec {
    pub fn build(&self) -> Result<CameraModel> {
        CameraModel::nadir(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.mount_height,
            self.yaw,
            self.width,
            self.height,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    /// Landmarks per square meter.
    pub density: f64,
    /// Explicit extent; defaults to the trajectory bounding box plus `margin`.
    pub extent: Option<Extent>,
    pub margin: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            density: 2000.0,
            extent: None,
            margin: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    #[serde(flatten)]
    pub shape: TrajectoryShape,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    0.1
}

/// Plain-text (TOML) description of a synthetic sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub world: WorldSpec,
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Also rasterize a dot image per observation.
    #[serde(default)]
    pub images: bool,
}

impl SimulationSpec {
    pub fn new(shape: TrajectoryShape, step: f64, seed: u64) -> Self {
        Self {
            name: None,
            seed,
            camera: CameraSpec::default(),
            world: WorldSpec::default(),
            trajectory: TrajectorySpec { shape, step },
            noise: NoiseSpec::default(),
            images: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }
}

/// Rendered sequence with its ground truth.
#[derive(Clone, Debug)]
pub struct SyntheticSequence {
    pub name: String,
    pub camera: CameraModel,
    pub world: LandmarkWorld,
    pub truth: Vec<Pose2>,
    pub observations: Vec<Observation>,
    pub images: Option<Vec<GrayImage>>,
}

impl SyntheticSequence {
    pub fn feature_sets(&self) -> impl Iterator<Item = &FeatureSet> {
        self.observations.iter().map(|o| &o.features)
    }
}

/// Per-observation seed: a SplitMix64 step away from the sequence seed.
pub fn observation_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn simulate(spec: &SimulationSpec) -> Result<SyntheticSequence> {
    spec.noise.validate()?;
    let camera = spec.camera.build()?;
    let truth = generate_trajectory(&spec.trajectory.shape.waypoints(), spec.trajectory.step)?;
    let extent = spec
        .world
        .extent
        .unwrap_or_else(|| Extent::around(&truth, spec.world.margin));
    let world = generate_world(extent, spec.world.density, spec.seed)?;
    let observations = truth
        .iter()
        .enumerate()
        .map(|(i, p)| render_observation(&world, p, &camera, &spec.noise, observation_seed(spec.seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let images = spec.images.then(|| {
        observations
            .iter()
            .map(|o| rasterize(o, camera.width(), camera.height()))
            .collect()
    });
    Ok(SyntheticSequence {
        name: spec.name.clone().unwrap_or_else(|| "synthetic".into()),
        camera,
        world,
        truth,
        observations,
        images,
    })
}

/// Descriptor documents for vocabulary training: views at `count` random
/// poses inside the world's extent.
pub fn training_documents(
    world: &LandmarkWorld,
    cam: &CameraModel,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<Descriptor>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = world.extent;
    (0..count)
        .map(|i| {
            let pose = Pose2::new(
                rng.random_range(e.min_x..e.max_x),
                rng.random_range(e.min_y..e.max_y),
                rng.random_range(-PI..PI),
            );
            let obs = render_observation(world, &pose, cam, &NoiseSpec::default(), observation_seed(seed, i))?;
            Ok(obs.features.descriptors().to_vec())
        })
        .collect()
}
