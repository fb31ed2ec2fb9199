//! Levenberg-Marquardt on a small square with an inconsistent loop factor.

use ground_slam::slam::{Factor, LmConfig, PoseGraph};
use ground_slam::Pose2;
use nalgebra::Matrix3;

fn main() -> ground_slam::Result<()> {
    let step = Pose2::new(1.0, 0.0, std::f64::consts::FRAC_PI_2);
    let odometry = Pose2::new(1.02, 0.03, std::f64::consts::FRAC_PI_2 + 0.02);
    let info = Matrix3::from_diagonal(&nalgebra::Vector3::new(100.0, 100.0, 400.0));

    let mut graph = PoseGraph::new();
    let mut pose = Pose2::identity();
    graph.add_pose(pose);
    graph.add_factor(Factor::prior(0, pose, Matrix3::identity() * 1e12)?)?;
    for i in 0..3 {
        pose = pose.compose(&odometry);
        graph.add_pose(pose);
        graph.add_factor(Factor::odometry(i, i + 1, odometry, info)?)?;
    }
    // Closing the square: pose 3 seen from pose 0.
    let closure = Pose2::identity().between(&step.compose(&step).compose(&step));
    graph.add_factor(Factor::loop_closure(0, 3, closure, info * 10.0)?)?;

    let summary = graph.optimize(&LmConfig::default())?;
    println!(
        "cost {:.6} -> {:.6} in {} iterations (converged: {})",
        summary.initial_cost, summary.final_cost, summary.iterations, summary.converged
    );
    for (i, p) in graph.poses().iter().enumerate() {
        println!("pose {i}: ({:+.4}, {:+.4}, {:+.4})", p.x(), p.y(), p.theta());
    }
    Ok(())
}
