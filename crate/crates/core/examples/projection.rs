//! Pixel to ground-plane projection with a downward-facing camera.

use ground_slam::geometry::{project_keypoints, PixelPoints};
use ground_slam::{CameraModel, Pose2};

fn main() -> ground_slam::Result<()> {
    let cam = CameraModel::nadir(400.0, 400.0, 240.0, 240.0, 0.25, 0.0, 480, 480)?;
    println!("camera {} m above ground", cam.ground_distance());
    println!("footprint diagonal {:.4} m", cam.footprint_diagonal()?);

    let pixels = PixelPoints::from_pixels([(240.0, 240.0), (0.0, 0.0), (480.0, 240.0), (240.0, 480.0)]);
    let ground = project_keypoints(&pixels, &cam)?;
    for (i, g) in ground.iter().enumerate() {
        let (u, v) = pixels.pixel(i);
        println!("pixel ({u:>5.1}, {v:>5.1}) -> robot frame ({:+.4}, {:+.4}) m", g.x, g.y);
    }

    // The same points seen from a robot standing elsewhere.
    let robot = Pose2::new(1.0, 0.5, std::f64::consts::FRAC_PI_2);
    for g in &ground {
        let w = robot.transform_point(g);
        println!("world ({:+.4}, {:+.4})", w.x, w.y);
    }
    Ok(())
}
