//! FAST-9 corners and steered BRIEF descriptors on two rendered views,
//! matched with the ratio test.

use ground_slam::features::{detect_and_describe, match_descriptors, DetectorConfig};
use ground_slam::simulation::{generate_world, rasterize, render_observation, CameraSpec, Extent, NoiseSpec};
use ground_slam::Pose2;

fn main() -> ground_slam::Result<()> {
    let cam = CameraSpec::default().build()?;
    let world = generate_world(Extent::new(-0.5, -0.5, 0.5, 0.5), 2000.0, 1)?;
    let cfg = DetectorConfig::default();

    let mut views = Vec::new();
    for (i, pose) in [Pose2::identity(), Pose2::new(0.04, 0.01, 0.2)].iter().enumerate() {
        let obs = render_observation(&world, pose, &cam, &NoiseSpec::default(), i as u64)?;
        let image = rasterize(&obs, cam.width(), cam.height());
        let (keypoints, descriptors) = detect_and_describe(&image, &cfg)?;
        println!("view {i}: {} landmarks rendered, {} keypoints", obs.len(), keypoints.len());
        views.push(descriptors);
    }

    let matches = match_descriptors(&views[1], &views[0], 0.7)?;
    let mean = matches.iter().map(|m| m.distance as f64).sum::<f64>() / matches.len().max(1) as f64;
    println!("{} matches, mean Hamming distance {mean:.1} bits", matches.len());
    Ok(())
}
