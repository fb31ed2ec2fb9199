//! On-disk sequence layout.
//!
//! ```text
//! <dir>/camera.cfg            camera model (see CameraModel::to_config_string)
//! <dir>/images/000000.pgm     grayscale images, .pgm or .png, zero-padded index
//! <dir>/features/000000.txt   optional pre-extracted features, one per line:
//!                             `<u px> <v px> <64 hex digit descriptor>`
//! <dir>/ground_truth.csv      optional, header `index,x,y,theta` (m, m, rad)
//! ```
//!
//! When both `images/` and `features/` exist they must hold the same number
//! of observations. Images are only decoded on demand.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract, Descriptor, DetectorConfig, FeatureSet};
use crate::geometry::{project_keypoints, CameraModel, PixelPoints, Pose2};
use crate::simulation::SyntheticSequence;

pub const CAMERA_FILE: &str = "camera.cfg";
pub const IMAGE_DIR: &str = "images";
pub const FEATURE_DIR: &str = "features";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

/// Where observations come from when a sequence has both kinds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// Features when present, images otherwise.
    #[default]
    Auto,
    Images,
    Features,
}

#[derive(Clone, Debug)]
pub struct Sequence {
    pub name: String,
    pub root: PathBuf,
    pub camera: CameraModel,
    images: Vec<PathBuf>,
    features: Vec<PathBuf>,
    pub ground_truth: Option<Vec<Pose2>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct GroundTruthRow {
    index: usize,
    x: f64,
    y: f64,
    theta: f64,
}

/// Files in `dir` with one of `extensions`, sorted by their numeric stem.
fn indexed_files(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut found: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if !extensions.iter().any(|e| e.eq_ignore_ascii_case(ext)) {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let index = stem
            .parse::<u64>()
            .map_err(|_| Error::dataset(&path, "file name is not a zero-padded index"))?;
        found.push((index, path));
    }
    found.sort();
    if let Some(w) = found.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::dataset(&w[1].1, "duplicate observation index"));
    }
    Ok(found.into_iter().map(|f| f.1).collect())
}

fn read_ground_truth(path: &Path) -> Result<Vec<Pose2>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::dataset(path, e.to_string()))?;
    let mut poses = Vec::new();
    for (row, rec) in reader.deserialize::<GroundTruthRow>().enumerate() {
        let rec = rec.map_err(|e| Error::dataset(path, e.to_string()))?;
        if rec.index != row {
            return Err(Error::dataset(
                path,
                format!("row {row} has index {}, expected {row}", rec.index),
            ));
        }
        poses.push(Pose2::new(rec.x, rec.y, rec.theta));
    }
    Ok(poses)
}

/// Parses a feature file into pixels and descriptors.
pub fn parse_features(text: &str) -> std::result::Result<(Vec<(f64, f64)>, Vec<Descriptor>), String> {
    let mut pixels = Vec::new();
    let mut descriptors = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [u, v, d] = fields[..] else {
            return Err(format!("line {}: expected `u v descriptor`", n + 1));
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("line {}: bad number `{s}`", n + 1));
        pixels.push((num(u)?, num(v)?));
        descriptors.push(d.parse().map_err(|e| format!("line {}: {e}", n + 1))?);
    }
    Ok((pixels, descriptors))
}

pub fn format_features(pixels: &[(f64, f64)], descriptors: &[Descriptor]) -> String {
    let mut out = String::from("# u v descriptor\n");
    for ((u, v), d) in pixels.iter().zip(descriptors) {
        let _ = writeln!(out, "{u} {v} {d}");
    }
    out
}

impl Sequence {
    /// Reads the layout under `root`. Images and feature files are listed,
    /// not decoded.
    pub fn load(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::dataset(root, "not a directory"));
        }
        let cam_path = root.join(CAMERA_FILE);
        if !cam_path.is_file() {
            return Err(Error::dataset(&cam_path, "missing camera configuration"));
        }
        let camera = CameraModel::load(&cam_path)?;
        let images = indexed_files(&root.join(IMAGE_DIR), &["pgm", "png"])?;
        let features = indexed_files(&root.join(FEATURE_DIR), &["txt"])?;
        if images.is_empty() && features.is_empty() {
            return Err(Error::dataset(root, "no images or feature files"));
        }
        if !images.is_empty() && !features.is_empty() && images.len() != features.len() {
            return Err(Error::dataset(
                root,
                format!("{} images but {} feature files", images.len(), features.len()),
            ));
        }
        let count = images.len().max(features.len());
        let gt_path = root.join(GROUND_TRUTH_FILE);
        let ground_truth = if gt_path.is_file() {
            let gt = read_ground_truth(&gt_path)?;
            if gt.len() != count {
                return Err(Error::dataset(
                    &gt_path,
                    format!("{} ground-truth rows for {count} observations", gt.len()),
                ));
            }
            Some(gt)
        } else {
            None
        };
        let name = root
            .file_name()
            .map_or_else(|| "sequence".into(), |n| n.to_string_lossy().into_owned());
        Ok(Self {
            name,
            root: root.to_path_buf(),
            camera,
            images,
            features,
            ground_truth,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len().max(self.features.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_images(&self) -> bool {
        !self.images.is_empty()
    }

    pub fn has_features(&self) -> bool {
        !self.features.is_empty()
    }

    pub fn can_evaluate(&self) -> bool {
        self.ground_truth.is_some()
    }

    pub fn image(&self, index: usize) -> Result<GrayImage> {
        let path = self
            .images
            .get(index)
            .ok_or_else(|| Error::dataset(&self.root, format!("no image {index}")))?;
        Ok(image::open(path)?.into_luma8())
    }

    /// Pre-extracted features of observation `index`, projected to the ground.
    pub fn stored_features(&self, index: usize) -> Result<FeatureSet> {
        let path = self
            .features
            .get(index)
            .ok_or_else(|| Error::dataset(&self.root, format!("no feature file {index}")))?;
        let (pixels, descriptors) =
            parse_features(&fs::read_to_string(path)?).map_err(|m| Error::dataset(path, m))?;
        let ground = project_keypoints(&PixelPoints::from_pixels(pixels), &self.camera)?;
        FeatureSet::new(ground, descriptors)
    }

    pub fn uses_images(&self, source: Source) -> Result<bool> {
        match source {
            Source::Auto => Ok(!self.has_features()),
            Source::Images if self.has_images() => Ok(true),
            Source::Features if self.has_features() => Ok(false),
            _ => Err(Error::dataset(&self.root, format!("sequence has no {source:?} source"))),
        }
    }

    /// Features of observation `index`, extracted from the image when
    /// `source` resolves to images.
    pub fn observation(&self, index: usize, source: Source, detector: &DetectorConfig) -> Result<FeatureSet> {
        if self.uses_images(source)? {
            extract(&self.image(index)?, &self.camera, detector)
        } else {
            self.stored_features(index)
        }
    }
}

/// Writes a ground-truth file in the sequence format.
pub fn write_ground_truth(path: &Path, poses: &[Pose2]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::dataset(path, e.to_string()))?;
    for (index, p) in poses.iter().enumerate() {
        w.serialize(GroundTruthRow {
            index,
            x: p.x(),
            y: p.y(),
            theta: p.theta(),
        })
        .map_err(|e| Error::dataset(path, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a synthetic sequence to `root` in the layout above.
pub fn export_sequence(seq: &SyntheticSequence, root: &Path) -> Result<()> {
    fs::create_dir_all(root.join(FEATURE_DIR))?;
    fs::write(root.join(CAMERA_FILE), seq.camera.to_config_string())?;
    for (i, obs) in seq.observations.iter().enumerate() {
        fs::write(
            root.join(FEATURE_DIR).join(format!("{i:06}.txt")),
            format_features(&obs.pixels, obs.features.descriptors()),
        )?;
    }
    if let Some(images) = &seq.images {
        fs::create_dir_all(root.join(IMAGE_DIR))?;
        for (i, img) in images.iter().enumerate() {
            img.save(root.join(IMAGE_DIR).join(format!("{i:06}.pgm")))?;
        }
    }
    write_ground_truth(&root.join(GROUND_TRUTH_FILE), &seq.truth)
}
