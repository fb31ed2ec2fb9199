use std::f64::consts::PI;
use std::sync::LazyLock;

use image::GrayImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Descriptor, Keypoint, PATCH_MARGIN};
use crate::error::{Error, Result};

/// Seed of the ChaCha8 stream that draws the comparison pattern. Changing it
/// changes every descriptor and invalidates existing vocabularies.
pub const PATTERN_SEED: u64 = 0x4754_534c_414d_0001;

const ANGLE_BINS: usize = 30; // 12° steps
const MAX_POINT_RADIUS: f64 = 12.5;
const BLUR_HALF: i32 = 2; // 5×5 box

type Offset = (i32, i32);

struct Pattern {
    /// `steered[bin][i]` is test `i` rotated by `bin · 12°`.
    steered: Vec<Vec<(Offset, Offset)>>,
}

static PATTERN: LazyLock<Pattern> = LazyLock::new(|| {
    let mut rng = ChaCha8Rng::seed_from_u64(PATTERN_SEED);
    let normal = Normal::<f64>::new(0.0, 31.0 / 5.0).expect("valid sigma");
    let mut sample = || -> (f64, f64) {
        loop {
            let p: (f64, f64) = (normal.sample(&mut rng), normal.sample(&mut rng));
            if p.0.hypot(p.1) <= MAX_POINT_RADIUS {
                return p;
            }
        }
    };
    let mut base = Vec::with_capacity(256);
    while base.len() < 256 {
        let a = sample();
        let b = sample();
        if (a.0.round(), a.1.round()) != (b.0.round(), b.1.round()) {
            base.push((a, b));
        }
    }

    let steered = (0..ANGLE_BINS)
        .map(|bin| {
            let angle = bin as f64 * 2.0 * PI / ANGLE_BINS as f64;
            let (s, c) = angle.sin_cos();
            let rot = |(x, y): (f64, f64)| -> Offset {
                ((c * x - s * y).round() as i32, (s * x + c * y).round() as i32)
            };
            base.iter().map(|&(a, b)| (rot(a), rot(b))).collect()
        })
        .collect();
    Pattern { steered }
});

/// 256 intensity comparisons between 5×5 box sums, with the test pattern
/// steered to the keypoint orientation (quantized to 12°).
pub fn describe(image: &GrayImage, kp: &Keypoint) -> Result<Descriptor> {
    let (w, h) = image.dimensions();
    let x = kp.x.round();
    let y = kp.y.round();
    let m = PATCH_MARGIN as f64;
    if !(x >= m && y >= m && x + m <= (w - 1) as f64 && y + m <= (h - 1) as f64) {
        return Err(Error::PatchMargin {
            x: kp.x,
            y: kp.y,
            margin: PATCH_MARGIN,
        });
    }
    let (cx, cy) = (x as i32, y as i32);

    let step = 2.0 * PI / ANGLE_BINS as f64;
    let bin = ((kp.orientation / step).round() as i64).rem_euclid(ANGLE_BINS as i64) as usize;

    let box_sum = |(dx, dy): Offset| -> u32 {
        let mut sum = 0u32;
        for v in -BLUR_HALF..=BLUR_HALF {
            for u in -BLUR_HALF..=BLUR_HALF {
                sum += image.get_pixel((cx + dx + u) as u32, (cy + dy + v) as u32)[0] as u32;
            }
        }
        sum
    };

    let mut d = Descriptor::default();
    for (i, &(a, b)) in PATTERN.steered[bin].iter().enumerate() {
        if box_sum(a) < box_sum(b) {
            d.set_bit(i, true);
        }
    }
    Ok(d)
}
