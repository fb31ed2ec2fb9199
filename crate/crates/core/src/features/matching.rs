use serde::{Deserialize, Serialize};

use super::{Descriptor, FeatureSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub query_index: usize,
    pub train_index: usize,
    /// Hamming distance in bits.
    pub distance: u32,
}

/// Exact 2-nearest-neighbour search by Hamming distance with the ratio test
/// `f0 ≤ ratio · f1`.
///
/// Ties are broken by the lowest train index. A query whose two nearest
/// neighbours are both at distance 0 is kept. Output is ordered by query
/// index with at most one match per query descriptor.
pub fn match_descriptors(
    query: &[Descriptor],
    train: &[Descriptor],
    ratio: f64,
) -> Result<Vec<Match>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "ratio must lie in (0, 1], got {ratio}"
        )));
    }
    if train.len() < 2 {
        return Err(Error::TooFewTrainDescriptors(train.len()));
    }

    let mut out = Vec::new();
    for (qi, q) in query.iter().enumerate() {
        let mut best = (u32::MAX, usize::MAX);
        let mut second = u32::MAX;
        for (ti, t) in train.iter().enumerate() {
            let d = q.hamming(t);
            if d < best.0 {
                second = best.0;
                best = (d, ti);
            } else if d < second {
                second = d;
            }
        }
        if best.0 as f64 <= ratio * second as f64 {
            out.push(Match {
                query_index: qi,
                train_index: best.1,
                distance: best.0,
            });
        }
    }
    Ok(out)
}

pub fn match_sets(query: &FeatureSet, train: &FeatureSet, ratio: f64) -> Result<Vec<Match>> {
    match_descriptors(query.descriptors(), train.descriptors(), ratio)
}
