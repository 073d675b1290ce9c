use crate::graph::normalize_name;

/// Maps text to a fixed-dimension vector with unit L2 norm, or the zero
/// vector when the text carries no signal.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Vec<f64>;
}

pub const TRIGRAM_DIMENSION: usize = 256;

/// Character-trigram hashing embedder.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramEmbedder;

impl EmbeddingProvider for TrigramEmbedder {
    fn dimension(&self) -> usize {
        TRIGRAM_DIMENSION
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        embed_trigram(text)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Character trigrams of the normalized text padded with one space on each
/// side, so `"ab"` yields `" ab"` and `"ab "`.
pub fn trigrams(text: &str) -> Vec<String> {
    let normalized = normalize_name(text);
    if normalized.is_empty() {
        return Vec::new();
    }
    let chars: Vec<char> = format!(" {normalized} ").chars().collect();
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

/// Hashes trigrams (FNV-1a) into 256 buckets and L2-normalizes.
///
/// Text that is empty after normalization maps to the all-zero vector; see
/// [`is_zero_vector`].
pub fn embed_trigram(text: &str) -> Vec<f64> {
    let mut vector = vec![0.0; TRIGRAM_DIMENSION];
    for gram in trigrams(text) {
        vector[(fnv1a(gram.as_bytes()) % TRIGRAM_DIMENSION as u64) as usize] += 1.0;
    }
    let norm = l2_norm(&vector);
    if norm > 0.0 {
        for x in &mut vector {
            *x /= norm;
        }
    }
    vector
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn is_zero_vector(v: &[f64]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

/// Cosine similarity clamped to [0, 1]; 0 when either side is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}
