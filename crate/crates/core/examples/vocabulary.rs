//! Vocabulary tree training and bag-of-words place recognition.

use ground_slam::place_recognition::{bow_score, BowDatabase, Vocabulary, VocabularyConfig};
use ground_slam::simulation::{generate_world, render_observation, training_documents, CameraSpec, Extent, NoiseSpec};
use ground_slam::Pose2;

fn main() -> ground_slam::Result<()> {
    let cam = CameraSpec::default().build()?;
    let extent = Extent::new(-1.0, -1.0, 1.0, 1.0);
    let training = generate_world(extent, 2000.0, 10)?;
    let docs = training_documents(&training, &cam, 60, 10)?;
    let vocab = Vocabulary::build(&docs, &VocabularyConfig::default())?;
    println!("{} words from {} documents", vocab.word_count(), docs.len());

    let world = generate_world(extent, 2000.0, 11)?;
    let places = [
        Pose2::new(0.0, 0.0, 0.0),
        Pose2::new(0.5, 0.0, 0.0),
        Pose2::new(0.0, 0.5, 1.0),
    ];
    let mut db = BowDatabase::new(1);
    for (i, pose) in places.iter().enumerate() {
        let obs = render_observation(&world, pose, &cam, &NoiseSpec::default(), i as u64)?;
        db.insert(i as u64, vocab.to_bow(obs.features.descriptors()))?;
    }

    // Revisit the first place with a small offset and noise.
    let noise = NoiseSpec { pixel_sigma: 0.5, outlier_rate: 0.05, ..Default::default() };
    let revisit = render_observation(&world, &Pose2::new(0.03, 0.02, 0.4), &cam, &noise, 99)?;
    let query = vocab.to_bow(revisit.features.descriptors());
    for c in db.query(&query, 10, 0.0) {
        println!("place {} score {:.3}", c.id, c.score);
    }
    let again = vocab.to_bow(revisit.features.descriptors());
    println!("self score {:.3}", bow_score(&query, &again));
    Ok(())
}
