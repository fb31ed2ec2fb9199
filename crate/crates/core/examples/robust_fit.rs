//! Huber IRLS against plain least squares on correspondences with 20%
//! outliers.

use ground_slam::estimation::{covariance_score, estimate_transform, least_squares_transform, EstimatorConfig, PointPairs};
use ground_slam::Pose2;
use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> ground_slam::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = Pose2::new(0.05, -0.02, 0.3);
    let noise = Normal::new(0.0, 0.001).unwrap();
    let src: Vec<Point2<f64>> = (0..50)
        .map(|_| Point2::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15)))
        .collect();
    let dst = src
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i % 5 == 0 {
                Point2::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15))
            } else {
                truth.transform_point(p) + Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng))
            }
        })
        .collect();
    let pairs = PointPairs::new(src, dst)?;

    let ls = least_squares_transform(&pairs)?;
    let est = estimate_transform(&pairs, &EstimatorConfig::default())?;
    let err = |p: &Pose2| (p.translation() - truth.translation()).norm() * 1e3;
    println!("truth        {truth:?}");
    println!("least squares error {:.3} mm", err(&ls));
    println!("huber         error {:.3} mm after {} iterations", err(&est.transform), est.iterations);
    println!("robust scale {:.3} mm", est.sigma * 1e3);
    println!("covariance score {:.2}", covariance_score(&est.covariance)?);
    let down = est.inlier_weights.iter().filter(|w| **w < 1.0).count();
    println!("{down} of {} pairs down-weighted", pairs.len());
    Ok(())
}
