//! Keypoints, 256-bit binary descriptors and ratio-test matching.
//!
//! Detection is a single-scale FAST-9 segment test with grid bucketing;
//! description is a steered BRIEF test pattern over a box-blurred patch.
//! Only the ground-plane projection of each keypoint survives extraction.

mod brief;
mod fast;
mod matching;

use std::fmt;
use std::str::FromStr;

use image::GrayImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_keypoints, CameraModel, GroundPoints, PixelPoints};

pub use brief::{describe, PATTERN_SEED};
pub use fast::{detect, DetectorConfig, MIN_IMAGE_SIDE};
pub use matching::{match_descriptors, match_sets, Match};

/// Minimum distance (pixels) between a keypoint and every image border.
pub const PATCH_MARGIN: u32 = 15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Sum of absolute intensity differences over the winning arc.
    pub response: f64,
    /// Intensity-centroid angle in image coordinates (y down), radians.
    pub orientation: f64,
}

/// 256-bit binary descriptor.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Descriptor(pub [u64; 4]);

impl Descriptor {
    pub const BITS: u32 = 256;

    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set_bit(&mut self, i: usize, value: bool) {
        let mask = 1u64 << (i % 64);
        if value {
            self.0[i / 64] |= mask;
        } else {
            self.0[i / 64] &= !mask;
        }
    }

    pub fn flip_bit(&mut self, i: usize) {
        self.0[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Descriptor([rng.random(), rng.random(), rng.random(), rng.random()])
    }

    /// Little-endian byte layout: word 0 first.
    pub fn to_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (i, w) in self.0.iter().enumerate() {
            out[i * 8..(i + 1) * 8].copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; 32]) -> Self {
        let mut words = [0u64; 4];
        for (i, w) in words.iter_mut().enumerate() {
            let mut chunk = [0u8; 8];
            chunk.copy_from_slice(&bytes[i * 8..(i + 1) * 8]);
            *w = u64::from_le_bytes(chunk);
        }
        Descriptor(words)
    }
}

impl fmt::Debug for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Descriptor({self})")
    }
}

/// 64 lowercase hex digits of [`Descriptor::to_bytes`].
impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.to_bytes() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl FromStr for Descriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad descriptor hex `{s}`"));
        if s.len() != 64 || !s.is_ascii() {
            return Err(bad());
        }
        let mut bytes = [0u8; 32];
        for (i, b) in bytes.iter_mut().enumerate() {
            *b = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        Ok(Descriptor::from_bytes(&bytes))
    }
}

impl Serialize for Descriptor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Descriptor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ground-plane keypoints of one observation with their descriptors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureSet {
    ground_points: GroundPoints,
    descriptors: Vec<Descriptor>,
}

impl FeatureSet {
    pub fn new(ground_points: GroundPoints, descriptors: Vec<Descriptor>) -> Result<Self> {
        if ground_points.len() != descriptors.len() {
            return Err(Error::InvalidConfig(format!(
                "{} ground points but {} descriptors",
                ground_points.len(),
                descriptors.len()
            )));
        }
        Ok(Self {
            ground_points,
            descriptors,
        })
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn ground_points(&self) -> &GroundPoints {
        &self.ground_points
    }

    pub fn descriptors(&self) -> &[Descriptor] {
        &self.descriptors
    }
}

/// Detects, describes and projects keypoints of one image. Pixel positions
/// are dropped once projected.
pub fn extract(image: &GrayImage, cam: &CameraModel, cfg: &DetectorConfig) -> Result<FeatureSet> {
    let (keypoints, descriptors) = detect_and_describe(image, cfg)?;
    let pixels = PixelPoints::from_pixels(keypoints.iter().map(|k| (k.x, k.y)));
    let ground = project_keypoints(&pixels, cam)?;
    FeatureSet::new(ground, descriptors)
}

pub fn detect_and_describe(
    image: &GrayImage,
    cfg: &DetectorConfig,
) -> Result<(Vec<Keypoint>, Vec<Descriptor>)> {
    let keypoints = detect(image, cfg)?;
    let descriptors = keypoints
        .iter()
        .map(|kp| describe(image, kp))
        .collect::<Result<Vec<_>>>()?;
    Ok((keypoints, descriptors))
}
