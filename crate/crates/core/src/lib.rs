//! Ground-texture SLAM for a downward-facing, calibrated monocular camera.
//!
//! Every image is reduced to binary keypoints projected onto the ground
//! plane. Consecutive images are registered with a Huber M-estimator to give
//! SE(2) odometry, earlier images are proposed as loop closures by a
//! bag-of-words database and filtered by three thresholds (BoW score, match
//! count, covariance score), and the resulting pose graph is solved with
//! Levenberg–Marquardt.
//!
//! The [`simulation`] module provides landmark worlds with exact ground truth
//! and [`dataset`] / [`eval`] load sequences and compute trajectory metrics.
//! See the crate's `examples/` directory for one runnable program per
//! capability.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod estimation;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod place_recognition;
pub mod simulation;
pub mod slam;

pub use error::{Error, Result};
pub use geometry::{CameraModel, GroundPoints, PixelPoints, Pose2};
