use serde::{Deserialize, Serialize};

/// Sparse word-weight vector, sorted by word id, L1 normalized.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BowVector(Vec<(u32, f64)>);

impl BowVector {
    /// Drops non-positive weights and normalizes the rest to unit L1 norm.
    pub fn from_weights<I: IntoIterator<Item = (u32, f64)>>(weights: I) -> Self {
        let mut entries: Vec<(u32, f64)> = weights.into_iter().filter(|(_, w)| *w > 0.0).collect();
        entries.sort_by_key(|e| e.0);
        entries.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if total > 0.0 {
            for e in &mut entries {
                e.1 /= total;
            }
        }
        Self(entries)
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_distance(&self, other: &BowVector) -> f64 {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    sum += a[i].1;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    sum += b[j].1;
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    sum += (a[i].1 - b[j].1).abs();
                    i += 1;
                    j += 1;
                }
            }
        }
        sum += a[i..].iter().map(|e| e.1).sum::<f64>();
        sum += b[j..].iter().map(|e| e.1).sum::<f64>();
        sum
    }
}

/// `1 − ½‖a − b‖₁`, in `[0, 1]`; 1 for identical vectors. Empty vectors
/// score 0 against everything.
pub fn bow_score(a: &BowVector, b: &BowVector) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    (1.0 - 0.5 * a.l1_distance(b)).clamp(0.0, 1.0)
}
