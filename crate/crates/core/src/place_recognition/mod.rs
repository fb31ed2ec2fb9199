//! Hierarchical binary vocabulary, TF-IDF bag-of-words vectors and the
//! delayed-insertion place database used to propose loop closures.

mod bow;
mod database;
mod format;
mod vocabulary;

pub use bow::{bow_score, BowVector};
pub use database::{BowCandidate, BowDatabase};
pub use format::{FORMAT_VERSION, MAGIC};
pub use vocabulary::{Vocabulary, VocabularyConfig};
