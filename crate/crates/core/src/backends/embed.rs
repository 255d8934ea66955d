//! Offline embedders.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;

use super::{BackendError, BackendFingerprint, Capability, Embedder};

pub const DEFAULT_DIMENSION: usize = 512;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(FNV_PRIME);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    // final avalanche so low bits depend on every input byte
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

/// Feature-hashed signed token counts, L2-normalized.
///
/// Tokens are maximal runs of alphanumeric characters of the lowercased
/// input, so `person:elise|feels|emotion:stressed` yields five tokens.
#[derive(Debug, Clone, Serialize)]
pub struct HashingEmbedder {
    dimension: usize,
    seed: u64,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(DEFAULT_DIMENSION, 0)
    }
}

impl HashingEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashingEmbedder { dimension, seed }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        let lower = text.to_lowercase();
        for token in lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let h = fnv1a(self.seed, token.as_bytes());
            let slot = (h % self.dimension as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[slot] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl Embedder for HashingEmbedder {
    fn fingerprint(&self) -> BackendFingerprint {
        BackendFingerprint::new(Capability::Embedding, "offline", "hashing", self)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Test double: an orthogonal one-hot vector per distinct text, so cosine
/// is 1 for equal texts and 0 otherwise.
#[derive(Debug)]
pub struct IndicatorEmbedder {
    dimension: usize,
    slots: Mutex<HashMap<String, usize>>,
}

impl IndicatorEmbedder {
    pub fn new(dimension: usize) -> Self {
        IndicatorEmbedder {
            dimension,
            slots: Mutex::new(HashMap::new()),
        }
    }
}

impl Default for IndicatorEmbedder {
    fn default() -> Self {
        IndicatorEmbedder::new(1 << 16)
    }
}

impl Embedder for IndicatorEmbedder {
    fn fingerprint(&self) -> BackendFingerprint {
        BackendFingerprint::new(Capability::Embedding, "offline", "indicator", &self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let mut slots = self.slots.lock().expect("indicator table lock");
        texts
            .iter()
            .map(|t| {
                let next = slots.len();
                let slot = *slots.entry(t.clone()).or_insert(next);
                if slot >= self.dimension {
                    return Err(BackendError::Invalid(format!(
                        "indicator embedder exhausted its {} slots",
                        self.dimension
                    )));
                }
                let mut v = vec![0.0; self.dimension];
                v[slot] = 1.0;
                Ok(v)
            })
            .collect()
    }
}
