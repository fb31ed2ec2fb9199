use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bow::BowVector;
use crate::error::{Error, Result};
use crate::features::Descriptor;

const ATTEMPTS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabularyConfig {
    /// Children per internal node.
    pub branching: usize,
    /// Number of levels below the root.
    pub depth: usize,
    pub seed: u64,
    /// k-medians iteration cap per node.
    pub max_iterations: usize,
    /// Independent k-medians runs per node; the lowest-distortion one is kept.
    pub attempts: usize,
}

impl Default for VocabularyConfig {
    fn default() -> Self {
        Self {
            branching: 10,
            depth: 4,
            seed: 0,
            max_iterations: 25,
            attempts: ATTEMPTS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Node {
    pub centroid: Descriptor,
    pub first_child: u32,
    pub child_count: u32,
    pub word: Option<u32>,
}

/// Vocabulary tree over 256-bit descriptors. Nodes are stored breadth-first
/// with the children of a node contiguous; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    pub(crate) branching: u32,
    pub(crate) depth: u32,
    pub(crate) nodes: Vec<Node>,
    /// Node index of every word (leaf).
    pub(crate) word_nodes: Vec<u32>,
    pub(crate) idf: Vec<f64>,
    pub(crate) document_count: u32,
}

impl Vocabulary {
    /// Clusters the descriptors of all `documents` by recursive k-medians and
    /// derives IDF weights `ln(N_docs / n_docs_containing_word)`.
    pub fn build(documents: &[Vec<Descriptor>], cfg: &VocabularyConfig) -> Result<Self> {
        if cfg.branching < 2 {
            return Err(Error::InvalidConfig("vocabulary branching must be >= 2".into()));
        }
        if cfg.depth < 1 {
            return Err(Error::InvalidConfig("vocabulary depth must be >= 1".into()));
        }
        let corpus: Vec<Descriptor> = documents.iter().flatten().copied().collect();
        if corpus.is_empty() {
            return Err(Error::InsufficientData("empty descriptor corpus".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut nodes = vec![Node {
            centroid: Descriptor::default(),
            first_child: 0,
            child_count: 0,
            word: None,
        }];
        let mut word_nodes = Vec::new();
        let mut queue = VecDeque::new();
        queue.push_back((0usize, (0..corpus.len()).collect::<Vec<usize>>(), 0usize));

        while let Some((node, members, level)) = queue.pop_front() {
            let distinct = members
                .iter()
                .map(|&i| corpus[i])
                .collect::<BTreeSet<_>>()
                .len();
            if level == cfg.depth || distinct < 2 {
                nodes[node].word = Some(word_nodes.len() as u32);
                word_nodes.push(node as u32);
                continue;
            }
            let k = cfg.branching.min(distinct);
            let clusters = (0..cfg.attempts.max(1))
                .map(|_| k_medians(&corpus, &members, k, cfg.max_iterations, &mut rng))
                .min_by_key(|c| distortion(&corpus, c))
                .expect("at least one attempt");
            nodes[node].first_child = nodes.len() as u32;
            nodes[node].child_count = clusters.len() as u32;
            for (centroid, cluster) in clusters {
                let child = nodes.len();
                nodes.push(Node {
                    centroid,
                    first_child: 0,
                    child_count: 0,
                    word: None,
                });
                queue.push_back((child, cluster, level + 1));
            }
        }

        let mut vocab = Vocabulary {
            branching: cfg.branching as u32,
            depth: cfg.depth as u32,
            nodes,
            word_nodes,
            idf: Vec::new(),
            document_count: documents.len() as u32,
        };

        let mut doc_freq = vec![0u32; vocab.word_count()];
        for doc in documents {
            let words: BTreeSet<u32> = doc.iter().map(|d| vocab.quantize(d)).collect();
            for w in words {
                doc_freq[w as usize] += 1;
            }
        }
        let n = documents.len().max(1) as f64;
        vocab.idf = doc_freq
            .into_iter()
            .map(|f| (n / f.max(1) as f64).ln())
            .collect();
        Ok(vocab)
    }

    pub fn word_count(&self) -> usize {
        self.word_nodes.len()
    }

    pub fn branching(&self) -> usize {
        self.branching as usize
    }

    pub fn depth(&self) -> usize {
        self.depth as usize
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn word_centroid(&self, word: u32) -> Descriptor {
        self.nodes[self.word_nodes[word as usize] as usize].centroid
    }

    /// Descends greedily (nearest child by Hamming distance, ties to the
    /// first child) to a leaf and returns its word id.
    pub fn quantize(&self, d: &Descriptor) -> u32 {
        let mut node = &self.nodes[0];
        loop {
            if let Some(w) = node.word {
                return w;
            }
            let first = node.first_child as usize;
            let children = &self.nodes[first..first + node.child_count as usize];
            let best = children
                .iter()
                .enumerate()
                .min_by_key(|(i, c)| (c.centroid.hamming(d), *i))
                .map(|(i, _)| first + i)
                .expect("internal node has children");
            node = &self.nodes[best];
        }
    }

    /// TF-IDF vector, L1 normalized. Empty input (or all-zero IDF) gives an
    /// empty vector.
    pub fn to_bow(&self, descriptors: &[Descriptor]) -> BowVector {
        if descriptors.is_empty() {
            return BowVector::default();
        }
        let mut counts = std::collections::BTreeMap::<u32, u32>::new();
        for d in descriptors {
            *counts.entry(self.quantize(d)).or_insert(0) += 1;
        }
        let total = descriptors.len() as f64;
        BowVector::from_weights(
            counts
                .into_iter()
                .map(|(w, c)| (w, c as f64 / total * self.idf[w as usize])),
        )
    }
}

/// Partitions `members` into at most `k` clusters around per-bit majority
/// centroids. Returns non-empty clusters only.
fn k_medians(
    corpus: &[Descriptor],
    members: &[usize],
    k: usize,
    max_iterations: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(Descriptor, Vec<usize>)> {
    let mut centers = seed_centers(corpus, members, k, rng);
    let mut assignment = vec![usize::MAX; members.len()];

    for _ in 0..max_iterations {
        let mut changed = false;
        for (slot, &m) in assignment.iter_mut().zip(members) {
            let c = nearest(&centers, &corpus[m]);
            if *slot != c {
                *slot = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }

        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (&c, &m) in assignment.iter().zip(members) {
            clusters[c].push(m);
        }
        for c in 0..k {
            if clusters[c].is_empty() {
                // Starved cluster: steal the member farthest from its center.
                let (pos, _) = assignment
                    .iter()
                    .zip(members)
                    .enumerate()
                    .filter(|(_, (&a, _))| clusters[a].len() > 1)
                    .map(|(pos, (&a, &m))| (pos, corpus[m].hamming(&centers[a])))
                    .fold((usize::MAX, 0u32), |best, cur| {
                        if best.0 == usize::MAX || cur.1 > best.1 {
                            cur
                        } else {
                            best
                        }
                    });
                if pos == usize::MAX {
                    continue;
                }
                let m = members[pos];
                let old = assignment[pos];
                clusters[old].retain(|&x| x != m);
                assignment[pos] = c;
                clusters[c].push(m);
                centers[c] = corpus[m];
            } else {
                centers[c] = majority(corpus, &clusters[c]);
            }
        }
    }

    // Membership consistent with the final centers.
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &m in members {
        clusters[nearest(&centers, &corpus[m])].push(m);
    }
    centers
        .into_iter()
        .zip(clusters)
        .filter(|(_, c)| !c.is_empty())
        .collect()
}

/// Total Hamming distance of every member to its cluster centroid.
fn distortion(corpus: &[Descriptor], clusters: &[(Descriptor, Vec<usize>)]) -> u64 {
    clusters
        .iter()
        .flat_map(|(c, members)| members.iter().map(move |&m| corpus[m].hamming(c) as u64))
        .sum()
}

fn nearest(centers: &[Descriptor], d: &Descriptor) -> usize {
    centers
        .iter()
        .enumerate()
        .min_by_key(|(i, c)| (c.hamming(d), *i))
        .map(|(i, _)| i)
        .expect("at least one center")
}

/// Per-bit majority vote; a tie gives 0.
fn majority(corpus: &[Descriptor], members: &[usize]) -> Descriptor {
    let mut counts = [0u32; 256];
    for &m in members {
        let d = &corpus[m];
        for (bit, count) in counts.iter_mut().enumerate() {
            *count += d.bit(bit) as u32;
        }
    }
    let mut out = Descriptor::default();
    for (bit, &count) in counts.iter().enumerate() {
        if 2 * count as usize > members.len() {
            out.set_bit(bit, true);
        }
    }
    out
}

/// k-means++ style seeding: first center uniform, the rest drawn with
/// probability proportional to the squared Hamming distance to the nearest
/// chosen center.
fn seed_centers(
    corpus: &[Descriptor],
    members: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Descriptor> {
    let mut centers = vec![corpus[members[rng.random_range(0..members.len())]]];
    let mut dist: Vec<u64> = members
        .iter()
        .map(|&m| (corpus[m].hamming(&centers[0]) as u64).pow(2))
        .collect();
    while centers.len() < k {
        let total: u64 = dist.iter().sum();
        if total == 0 {
            break;
        }
        let mut target = rng.random_range(0..total);
        let mut pick = 0;
        for (i, &d) in dist.iter().enumerate() {
            if target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = corpus[members[pick]];
        centers.push(c);
        for (d, &m) in dist.iter_mut().zip(members) {
            *d = (*d).min((corpus[m].hamming(&c) as u64).pow(2));
        }
    }
    centers
}
