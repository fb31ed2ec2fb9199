use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::{Keypoint, PATCH_MARGIN};
use crate::error::{Error, Result};

pub const MIN_IMAGE_SIDE: u32 = 64;

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const MIN_ARC: usize = 9;
const ORIENTATION_RADIUS: i32 = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Segment-test intensity threshold.
    pub threshold: u8,
    /// Side of the square bucketing cell, pixels. One corner survives per cell.
    pub cell_size: u32,
    pub max_features: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 20,
            cell_size: 8,
            max_features: 1000,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cell_size == 0 {
            return Err(Error::InvalidConfig("detector cell_size must be > 0".into()));
        }
        if self.max_features == 0 {
            return Err(Error::InvalidConfig("detector max_features must be > 0".into()));
        }
        Ok(())
    }
}

/// FAST-9 corners, 3×3 non-maximum suppression, then the strongest corner of
/// every grid cell, capped at `max_features` by response. Output is sorted by
/// decreasing response (ties by row, then column).
pub fn detect(image: &GrayImage, cfg: &DetectorConfig) -> Result<Vec<Keypoint>> {
    cfg.validate()?;
    let (w, h) = image.dimensions();
    if w < MIN_IMAGE_SIDE || h < MIN_IMAGE_SIDE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: MIN_IMAGE_SIDE,
        });
    }

    let m = PATCH_MARGIN;
    let mut score = vec![0u32; (w * h) as usize];
    for y in m..h - m {
        for x in m..w - m {
            score[(y * w + x) as usize] = segment_score(image, x, y, cfg.threshold);
        }
    }

    let cells_x = w.div_ceil(cfg.cell_size);
    let cells_y = h.div_ceil(cfg.cell_size);
    let mut best: Vec<Option<(u32, u32, u32)>> = vec![None; (cells_x * cells_y) as usize];
    for y in m..h - m {
        for x in m..w - m {
            let s = score[(y * w + x) as usize];
            if s == 0 || !is_local_max(&score, w, x, y, s) {
                continue;
            }
            let cell = ((y / cfg.cell_size) * cells_x + x / cfg.cell_size) as usize;
            // Raster order plus strict `>` keeps the first maximum in a cell.
            if best[cell].is_none_or(|(bs, _, _)| s > bs) {
                best[cell] = Some((s, x, y));
            }
        }
    }

    let mut corners: Vec<(u32, u32, u32)> = best.into_iter().flatten().collect();
    corners.sort_by(|a, b| b.0.cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
    corners.truncate(cfg.max_features);

    Ok(corners
        .into_iter()
        .map(|(s, x, y)| Keypoint {
            x: x as f64,
            y: y as f64,
            response: s as f64,
            orientation: intensity_centroid_angle(image, x, y),
        })
        .collect())
}

// Ties go to the earlier pixel in raster order so plateaus keep one corner.
fn is_local_max(score: &[u32], w: u32, x: u32, y: u32, s: u32) -> bool {
    for dy in -1i32..=1 {
        for dx in -1i32..=1 {
            if dx == 0 && dy == 0 {
                continue;
            }
            let nx = (x as i32 + dx) as u32;
            let ny = (y as i32 + dy) as u32;
            let ns = score[(ny * w + nx) as usize];
            let earlier = dy < 0 || (dy == 0 && dx < 0);
            if ns > s || (ns == s && earlier) {
                return false;
            }
        }
    }
    true
}

/// Zero when no contiguous arc of ≥ 9 circle pixels is uniformly brighter or
/// darker than the center by more than `t`; otherwise the summed absolute
/// difference over the longest such arc.
fn segment_score(image: &GrayImage, x: u32, y: u32, t: u8) -> u32 {
    let center = image.get_pixel(x, y)[0] as i32;
    let t = t as i32;
    let mut class = [0i8; 16];
    let mut diff = [0u32; 16];
    for (i, (dx, dy)) in CIRCLE.iter().enumerate() {
        let p = image.get_pixel((x as i32 + dx) as u32, (y as i32 + dy) as u32)[0] as i32;
        diff[i] = (p - center).unsigned_abs();
        class[i] = if p > center + t {
            1
        } else if p < center - t {
            -1
        } else {
            0
        };
    }

    // A 9-arc always covers at least two of the four compass points.
    let compass = [class[0], class[4], class[8], class[12]];
    let bright = compass.iter().filter(|&&c| c == 1).count();
    let dark = compass.iter().filter(|&&c| c == -1).count();
    if bright < 2 && dark < 2 {
        return 0;
    }

    let mut best_len = 0usize;
    let mut best_sum = 0u32;
    for sign in [1i8, -1] {
        if class.iter().all(|&c| c == sign) {
            return diff.iter().sum();
        }
        // Walk twice around the circle so wrapping arcs are seen whole.
        let mut run = 0usize;
        let mut sum = 0u32;
        for k in 0..32 {
            let i = k % 16;
            if class[i] == sign {
                run += 1;
                sum += diff[i];
                if run > best_len && run <= 16 {
                    best_len = run;
                    best_sum = sum;
                }
            } else {
                run = 0;
                sum = 0;
            }
        }
    }
    if best_len >= MIN_ARC {
        best_sum
    } else {
        0
    }
}

fn intensity_centroid_angle(image: &GrayImage, x: u32, y: u32) -> f64 {
    let r = ORIENTATION_RADIUS;
    let mut m10 = 0i64;
    let mut m01 = 0i64;
    for v in -r..=r {
        for u in -r..=r {
            if u * u + v * v > r * r {
                continue;
            }
            let p = image.get_pixel((x as i32 + u) as u32, (y as i32 + v) as u32)[0] as i64;
            m10 += u as i64 * p;
            m01 += v as i64 * p;
        }
    }
    (m01 as f64).atan2(m10 as f64)
}
