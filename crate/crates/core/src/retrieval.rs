//! Bundle embeddings and exhaustive top-k search over a retrieval split.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, BackendFingerprint, Embedder};
use crate::corpus::Artifact;
use crate::decompose::{decompose_bundle, flatten_bundle, DecomposeError, Encoders};

/// Texts per embedding request when indexing many bundles.
pub const EMBED_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("bundle is empty")]
    EmptyBundle,
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error("embedding failed: {0}")]
    Embedding(#[from] BackendError),
    #[error("vector for `{id}` has dimension {found}, index expects {expected}")]
    Dimension {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("vector for `{0}` has zero norm")]
    ZeroNorm(String),
    #[error("duplicate index entry `{0}`")]
    Duplicate(String),
    #[error("k = {k} exceeds the {available} candidates in the index")]
    KTooLarge { k: usize, available: usize },
    #[error("index cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub instance_id: String,
    pub vector: Vec<f64>,
    pub norm: f64,
}

/// Immutable-after-build list of vectors with precomputed norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingIndex {
    pub dimension: usize,
    entries: Vec<IndexEntry>,
}

impl EmbeddingIndex {
    pub fn new(dimension: usize) -> Self {
        EmbeddingIndex {
            dimension,
            entries: Vec::new(),
        }
    }

    pub fn insert(&mut self, instance_id: &str, vector: Vec<f64>) -> Result<(), RetrievalError> {
        if vector.len() != self.dimension {
            return Err(RetrievalError::Dimension {
                id: instance_id.to_string(),
                expected: self.dimension,
                found: vector.len(),
            });
        }
        let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(RetrievalError::ZeroNorm(instance_id.to_string()));
        }
        if self.contains(instance_id) {
            return Err(RetrievalError::Duplicate(instance_id.to_string()));
        }
        self.entries.push(IndexEntry {
            instance_id: instance_id.to_string(),
            vector,
            norm,
        });
        Ok(())
    }

    /// Index a subset of precomputed vectors, in the order of `ids`.
    pub fn from_vectors<'a>(
        dimension: usize,
        ids: impl IntoIterator<Item = &'a str>,
        vectors: &BTreeMap<String, Vec<f64>>,
    ) -> Result<Self, RetrievalError> {
        let mut index = EmbeddingIndex::new(dimension);
        for id in ids {
            let v = vectors
                .get(id)
                .ok_or_else(|| RetrievalError::Cache(format!("no vector for `{id}`")))?;
            index.insert(id, v.clone())?;
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, instance_id: &str) -> bool {
        self.entries.iter().any(|e| e.instance_id == instance_id)
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    /// Every entry other than `exclude`, by descending cosine similarity,
    /// ties by ascending id.
    pub fn ranked(&self, query: &[f64], exclude: Option<&str>) -> Vec<(String, f64)> {
        let qn = query.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut scored: Vec<(String, f64)> = self
            .entries
            .iter()
            .filter(|e| Some(e.instance_id.as_str()) != exclude)
            .map(|e| {
                let dot: f64 = e.vector.iter().zip(query).map(|(a, b)| a * b).sum();
                let sim = if qn > 0.0 { dot / (e.norm * qn) } else { 0.0 };
                (e.instance_id.clone(), sim)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        scored
    }
}

/// The `k` most similar ids, excluding `exclude` (the query's own id) when
/// it is indexed.
pub fn top_k(
    query: &[f64],
    index: &EmbeddingIndex,
    k: usize,
    exclude: Option<&str>,
) -> Result<Vec<String>, RetrievalError> {
    let ranked = index.ranked(query, exclude);
    if k > ranked.len() {
        return Err(RetrievalError::KTooLarge {
            k,
            available: ranked.len(),
        });
    }
    Ok(ranked.into_iter().take(k).map(|(id, _)| id).collect())
}

/// Flattened decomposed text of a bundle.
pub fn bundle_text(bundle: &[Artifact], encoders: &Encoders) -> Result<String, RetrievalError> {
    if bundle.is_empty() {
        return Err(RetrievalError::EmptyBundle);
    }
    Ok(flatten_bundle(&decompose_bundle(bundle, encoders)?))
}

pub fn embed_bundle(
    bundle: &[Artifact],
    encoders: &Encoders,
    embedder: &dyn Embedder,
) -> Result<Vec<f64>, RetrievalError> {
    let text = bundle_text(bundle, encoders)?;
    let mut rows = embedder.embed(&[text])?;
    rows.pop()
        .ok_or_else(|| RetrievalError::Embedding(BackendError::ResponseShape("no embedding returned".into())))
}

/// Embed many texts in batches of [`EMBED_BATCH`], preserving order.
pub fn embed_texts(
    embedder: &dyn Embedder,
    items: &[(String, String)],
) -> Result<BTreeMap<String, Vec<f64>>, RetrievalError> {
    let mut out = BTreeMap::new();
    for chunk in items.chunks(EMBED_BATCH) {
        let texts: Vec<String> = chunk.iter().map(|(_, t)| t.clone()).collect();
        let rows = embedder.embed(&texts)?;
        if rows.len() != texts.len() {
            return Err(RetrievalError::Embedding(BackendError::ResponseShape(format!(
                "{} embeddings for {} texts",
                rows.len(),
                texts.len()
            ))));
        }
        for ((id, _), v) in chunk.iter().zip(rows) {
            out.insert(id.clone(), v);
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    embedder: BackendFingerprint,
    dimension: usize,
    /// instance id -> (sha256 of bundle text, vector)
    vectors: BTreeMap<String, (String, Vec<f64>)>,
}

/// Load cached bundle vectors. Entries are reused only when the embedder
/// fingerprint matches and the bundle text hash is unchanged.
pub fn load_vector_cache(
    path: &Path,
    embedder: &BackendFingerprint,
    texts: &BTreeMap<String, String>,
) -> BTreeMap<String, Vec<f64>> {
    let Ok(raw) = fs::read_to_string(path) else {
        return BTreeMap::new();
    };
    let Ok(file) = serde_json::from_str::<CacheFile>(&raw) else {
        log::warn!("ignoring unreadable index cache {}", path.display());
        return BTreeMap::new();
    };
    if &file.embedder != embedder {
        log::info!(
            "index cache {} was built by another embedder; rebuilding",
            path.display()
        );
        return BTreeMap::new();
    }
    file.vectors
        .into_iter()
        .filter(|(id, (hash, v))| {
            v.len() == file.dimension
                && texts
                    .get(id)
                    .is_some_and(|t| crate::seed::sha256_hex(t.as_bytes()) == *hash)
        })
        .map(|(id, (_, v))| (id, v))
        .collect()
}

pub fn save_vector_cache(
    path: &Path,
    embedder: &BackendFingerprint,
    dimension: usize,
    texts: &BTreeMap<String, String>,
    vectors: &BTreeMap<String, Vec<f64>>,
) -> Result<(), RetrievalError> {
    let file = CacheFile {
        embedder: embedder.clone(),
        dimension,
        vectors: vectors
            .iter()
            .filter_map(|(id, v)| {
                texts
                    .get(id)
                    .map(|t| (id.clone(), (crate::seed::sha256_hex(t.as_bytes()), v.clone())))
            })
            .collect(),
    };
    let json = serde_json::to_vec(&file).map_err(|e| RetrievalError::Cache(e.to_string()))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| RetrievalError::Cache(e.to_string()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, json).map_err(|e| RetrievalError::Cache(e.to_string()))?;
    fs::rename(&tmp, path).map_err(|e| RetrievalError::Cache(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{cosine, HashingEmbedder};
    use crate::corpus::Modality;

    fn text_artifact(id: &str, content: &str) -> Artifact {
        Artifact {
            artifact_id: id.into(),
            modality: Modality::Text,
            content: content.into(),
            meta: BTreeMap::from([("genre".into(), "email".into())]),
        }
    }

    fn unit(dim: usize, hot: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[hot] = 1.0;
        v
    }

    #[test]
    fn identical_bundles_embed_identically() {
        let emb = HashingEmbedder::default();
        let b = vec![text_artifact("a", "lunch at the cafe with bob")];
        let v1 = embed_bundle(&b, &Encoders::offline(), &emb).unwrap();
        let v2 = embed_bundle(&b, &Encoders::offline(), &emb).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(v1.len(), crate::backends::embed::DEFAULT_DIMENSION);
    }

    #[test]
    fn disjoint_bundles_are_dissimilar() {
        let emb = HashingEmbedder::default();
        let a = vec![text_artifact(
            "q1",
            "quarterly budget spreadsheet deadline review",
        )];
        let b = vec![Artifact {
            artifact_id: "z9".into(),
            modality: Modality::Audio,
            content: "transcript: sunny beach picnic sandwiches lemonade\ntempo: slow".into(),
            meta: BTreeMap::from([("genre".into(), "chat_log".into())]),
        }];
        let va = embed_bundle(&a, &Encoders::offline(), &emb).unwrap();
        let vb = embed_bundle(&b, &Encoders::offline(), &emb).unwrap();
        assert!(cosine(&va, &vb) < 0.2);
    }

    #[test]
    fn self_is_excluded_and_nearest_neighbor_leads() {
        let mut idx = EmbeddingIndex::new(3);
        idx.insert("a", vec![1.0, 0.0, 0.0]).unwrap();
        idx.insert("b", vec![0.9, 0.1, 0.0]).unwrap();
        idx.insert("c", vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(top_k(&[1.0, 0.0, 0.0], &idx, 1, None).unwrap(), vec!["a"]);
        assert_eq!(top_k(&[1.0, 0.0, 0.0], &idx, 1, Some("a")).unwrap(), vec!["b"]);
        let all = top_k(&[1.0, 0.0, 0.0], &idx, 2, Some("a")).unwrap();
        assert_eq!(all, vec!["b", "c"]);
        assert!(matches!(
            top_k(&[1.0, 0.0, 0.0], &idx, 3, Some("a")),
            Err(RetrievalError::KTooLarge { k: 3, available: 2 })
        ));
    }

    #[test]
    fn orthogonal_query_ties_break_by_id() {
        let mut idx = EmbeddingIndex::new(4);
        for (id, hot) in [("d", 0), ("b", 1), ("c", 2)] {
            idx.insert(id, unit(4, hot)).unwrap();
        }
        assert_eq!(top_k(&unit(4, 3), &idx, 3, None).unwrap(), vec!["b", "c", "d"]);
    }

    #[test]
    fn top_k_is_prefix_of_ranking() {
        let emb = HashingEmbedder::default();
        let mut idx = EmbeddingIndex::new(emb.dimension());
        let words = [
            "office meeting",
            "gym run",
            "cafe lunch",
            "office lunch",
            "park run",
        ];
        for (i, w) in words.iter().enumerate() {
            idx.insert(&format!("i{i}"), emb.embed_one(w)).unwrap();
        }
        let q = emb.embed_one("office run");
        let full: Vec<String> = idx.ranked(&q, None).into_iter().map(|(id, _)| id).collect();
        for k in 0..=words.len() {
            assert_eq!(top_k(&q, &idx, k, None).unwrap(), full[..k]);
        }
    }

    #[test]
    fn index_rejects_bad_vectors() {
        let mut idx = EmbeddingIndex::new(2);
        assert!(matches!(
            idx.insert("a", vec![1.0]),
            Err(RetrievalError::Dimension { .. })
        ));
        assert!(matches!(
            idx.insert("a", vec![0.0, 0.0]),
            Err(RetrievalError::ZeroNorm(_))
        ));
        idx.insert("a", vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            idx.insert("a", vec![1.0, 0.0]),
            Err(RetrievalError::Duplicate(_))
        ));
    }

    #[test]
    fn vector_cache_round_trips_and_invalidates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        let emb = HashingEmbedder::default();
        let texts = BTreeMap::from([("a".to_string(), "hello".to_string())]);
        let vectors = BTreeMap::from([("a".to_string(), emb.embed_one("hello"))]);
        save_vector_cache(&path, &emb.fingerprint(), emb.dimension(), &texts, &vectors).unwrap();
        assert_eq!(load_vector_cache(&path, &emb.fingerprint(), &texts), vectors);

        let other = HashingEmbedder::new(emb.dimension(), 99);
        assert!(load_vector_cache(&path, &other.fingerprint(), &texts).is_empty());
        let changed = BTreeMap::from([("a".to_string(), "bye".to_string())]);
        assert!(load_vector_cache(&path, &emb.fingerprint(), &changed).is_empty());
    }
}
