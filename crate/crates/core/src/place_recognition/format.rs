//! Binary vocabulary file, version 1. All integers and floats little-endian.
//!
//! ```text
//! offset  size        field
//! 0       8           magic "GTSVOCAB"
//! 8       4  u32      version (= 1)
//! 12      4  u32      branching factor
//! 16      4  u32      depth
//! 20      4  u32      word count W
//! 24      4  u32      node count M
//! 28      4  u32      document count used for IDF
//! 32      44·M        node table, breadth-first, node 0 = root:
//!                       32 bytes centroid (descriptor words 0..3, LE)
//!                       u32 first child index
//!                       u32 child count (0 for a leaf)
//!                       u32 word id (0xFFFFFFFF for internal nodes)
//! 32+44M  8·W f64     IDF weight per word
//! end-4   4  u32      CRC-32 (IEEE) of every preceding byte
//! ```

use std::path::Path;

use super::vocabulary::{Node, Vocabulary};
use crate::error::{Error, Result};
use crate::features::Descriptor;

pub const MAGIC: &[u8; 8] = b"GTSVOCAB";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: usize = 32;
const NODE_LEN: usize = 44;
const NO_WORD: u32 = u32::MAX;

impl Vocabulary {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            HEADER_LEN + NODE_LEN * self.nodes.len() + 8 * self.idf.len() + 4,
        );
        out.extend_from_slice(MAGIC);
        for v in [
            FORMAT_VERSION,
            self.branching,
            self.depth,
            self.word_nodes.len() as u32,
            self.nodes.len() as u32,
            self.document_count,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for n in &self.nodes {
            out.extend_from_slice(&n.centroid.to_bytes());
            out.extend_from_slice(&n.first_child.to_le_bytes());
            out.extend_from_slice(&n.child_count.to_le_bytes());
            out.extend_from_slice(&n.word.unwrap_or(NO_WORD).to_le_bytes());
        }
        for w in &self.idf {
            out.extend_from_slice(&w.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| Error::VocabularyFormat(m.to_string());
        if bytes.len() < HEADER_LEN + 4 {
            return Err(err("file too short"));
        }
        if &bytes[..8] != MAGIC {
            return Err(err("bad magic"));
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(crc_bytes.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(err("checksum mismatch"));
        }
        let u32_at = |off: usize| u32::from_le_bytes(body[off..off + 4].try_into().expect("4 bytes"));
        let version = u32_at(8);
        if version != FORMAT_VERSION {
            return Err(Error::VocabularyFormat(format!("unsupported version {version}")));
        }
        let branching = u32_at(12);
        let depth = u32_at(16);
        let words = u32_at(20) as usize;
        let node_count = u32_at(24) as usize;
        let document_count = u32_at(28);
        let expected = HEADER_LEN + NODE_LEN * node_count + 8 * words;
        if body.len() != expected || node_count == 0 {
            return Err(err("size does not match header"));
        }

        let mut nodes = Vec::with_capacity(node_count);
        let mut word_nodes = vec![u32::MAX; words];
        for i in 0..node_count {
            let off = HEADER_LEN + i * NODE_LEN;
            let centroid = Descriptor::from_bytes(body[off..off + 32].try_into().expect("32 bytes"));
            let first_child = u32_at(off + 32);
            let child_count = u32_at(off + 36);
            let word = u32_at(off + 40);
            let word = if word == NO_WORD {
                if child_count == 0 {
                    return Err(err("internal node without children"));
                }
                if (first_child as usize) <= i
                    || first_child as usize + child_count as usize > node_count
                {
                    return Err(err("child range out of bounds"));
                }
                None
            } else {
                if child_count != 0 || word as usize >= words || word_nodes[word as usize] != u32::MAX {
                    return Err(err("inconsistent leaf"));
                }
                word_nodes[word as usize] = i as u32;
                Some(word)
            };
            nodes.push(Node {
                centroid,
                first_child,
                child_count,
                word,
            });
        }
        if word_nodes.contains(&u32::MAX) {
            return Err(err("word without leaf"));
        }
        let idf_off = HEADER_LEN + NODE_LEN * node_count;
        let idf = (0..words)
            .map(|w| {
                let o = idf_off + 8 * w;
                f64::from_le_bytes(body[o..o + 8].try_into().expect("8 bytes"))
            })
            .collect();

        Ok(Vocabulary {
            branching,
            depth,
            nodes,
            word_nodes,
            idf,
            document_count,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::place_recognition::VocabularyConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_vocab() -> Vocabulary {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let docs: Vec<Vec<Descriptor>> = (0..20)
            .map(|_| (0..30).map(|_| Descriptor::random(&mut rng)).collect())
            .collect();
        let cfg = VocabularyConfig {
            branching: 4,
            depth: 3,
            ..Default::default()
        };
        Vocabulary::build(&docs, &cfg).unwrap()
    }

    #[test]
    fn round_trip() {
        let v = sample_vocab();
        let bytes = v.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(Vocabulary::from_bytes(&bytes).unwrap(), v);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = sample_vocab().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        assert!(matches!(
            Vocabulary::from_bytes(&bytes),
            Err(Error::VocabularyFormat(m)) if m.contains("checksum")
        ));
        assert!(Vocabulary::from_bytes(b"GTSVOCAB").is_err());
        assert!(Vocabulary::from_bytes(&[0u8; 64]).is_err());
    }
}
