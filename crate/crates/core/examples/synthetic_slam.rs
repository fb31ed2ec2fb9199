//! Full pipeline on a noisy figure-eight, with and without loop closure.

use ground_slam::eval::{evaluate, loop_closure_audit, Alignment};
use ground_slam::place_recognition::{Vocabulary, VocabularyConfig};
use ground_slam::simulation::{generate_world, simulate, training_documents, SimulationSpec, TrajectoryShape};
use ground_slam::slam::{FactorKind, GroundSlam, SlamConfig};

fn main() -> ground_slam::Result<()> {
    let mut spec = SimulationSpec::new(TrajectoryShape::FigureEight { size: 1.0 }, 0.1, 7);
    spec.noise.pixel_sigma = 0.5;
    spec.noise.outlier_rate = 0.05;
    let seq = simulate(&spec)?;

    let training = generate_world(seq.world.extent, seq.world.density, 1234)?;
    let docs = training_documents(&training, &seq.camera, 60, 7)?;
    let vocab = Vocabulary::build(&docs, &VocabularyConfig::default())?;

    for loop_closure in [false, true] {
        let config = SlamConfig { loop_closure, ..Default::default() };
        let mut slam = GroundSlam::new(seq.camera.clone(), vocab.clone(), config)?;
        for f in seq.feature_sets() {
            slam.process_features(f.clone())?;
        }
        let errors = evaluate(slam.poses(), &seq.truth, Alignment::FirstPose)?;
        println!(
            "loop closure {loop_closure:>5}: final error {:.3} mm, MAE {:.3} cm/m",
            errors.final_position_error * 1e3,
            errors.translational_mae_normalized
        );
        if loop_closure {
            let closures: Vec<_> = slam
                .graph()
                .factors()
                .iter()
                .filter(|f| f.kind() == FactorKind::Loop)
                .map(|f| (f.from().unwrap(), f.to(), *f.measurement()))
                .collect();
            let radius = seq.camera.footprint_diagonal()? / 2.0;
            let audit = loop_closure_audit(&closures, &seq.truth, radius, slam.config().delay)?;
            println!(
                "{} closures, precision {:?}, recall {:?}",
                closures.len(),
                audit.precision,
                audit.recall
            );
        }
    }
    Ok(())
}
