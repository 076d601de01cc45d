//! Embedding interface and the hashed bag-of-words reference embedder.

use super::lexical::tokenize;

pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_SEED: u64 = 0x5eed_cafe_f00d_0256;

pub trait Embedder: Send + Sync {
    /// Identifies the embedding space; vectors with different tags are not
    /// comparable.
    fn tag(&self) -> &str;
    /// Unit-length vector, or all zeros for text without terms.
    fn embed(&self, text: &str) -> Vec<f64>;
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Term counts hashed into `dim` buckets with seeded FNV-1a, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dim: usize,
    seed: u64,
    tag: String,
}

impl HashedEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            seed,
            tag: format!("hashed-bow-d{dim}-s{seed:016x}"),
        }
    }

    pub fn bucket(&self, term: &str) -> usize {
        (fnv1a(self.seed, term.as_bytes()) % self.dim as u64) as usize
    }
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM, DEFAULT_SEED)
    }
}

impl Embedder for HashedEmbedder {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for t in tokenize(text) {
            v[self.bucket(&t)] += 1.0;
        }
        normalize(&mut v);
        v
    }
}

pub fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
