//! Writes a synthetic sequence in the on-disk layout, loads it back, runs
//! SLAM on the stored features and saves the run report.

use ground_slam::dataset::{export_sequence, Sequence, Source};
use ground_slam::place_recognition::{Vocabulary, VocabularyConfig};
use ground_slam::simulation::{simulate, SimulationSpec, TrajectoryShape};
use ground_slam::slam::{GroundSlam, RunReport, SlamConfig};

fn main() -> ground_slam::Result<()> {
    let root = std::env::temp_dir().join("ground-slam-roundtrip");
    let seq = simulate(&SimulationSpec::new(TrajectoryShape::Square { side: 1.0 }, 0.1, 2))?;
    export_sequence(&seq, &root)?;

    let loaded = Sequence::load(&root)?;
    println!("{}: {} observations, ground truth: {}", loaded.name, loaded.len(), loaded.can_evaluate());

    let cfg = SlamConfig::default();
    let docs: Vec<_> = (0..loaded.len())
        .map(|i| loaded.observation(i, Source::Features, &cfg.detector).map(|f| f.descriptors().to_vec()))
        .collect::<ground_slam::Result<_>>()?;
    let vocab = Vocabulary::build(&docs, &VocabularyConfig { depth: 3, ..Default::default() })?;

    let mut slam = GroundSlam::new(loaded.camera.clone(), vocab, cfg)?;
    for i in 0..loaded.len() {
        slam.process_features(loaded.stored_features(i)?)?;
    }
    let report = RunReport::from_slam(&slam, &loaded.name, false);
    let path = root.join("run_report.json");
    std::fs::write(&path, report.to_json())?;
    println!("{} loop closures, report at {}", report.loop_closures, path.display());
    Ok(())
}
