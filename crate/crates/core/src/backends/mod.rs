//! Capability interfaces (text generation, embedding, media encoding) and
//! their offline and HTTP implementations.
//!
//! Predictors only ever see a [`GenerationRequest`]. The oracle family is
//! constructed with a gold table up front and looks graphs up by instance id;
//! nothing else in the pipeline hands gold graphs to a backend.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Artifact;
use crate::decompose::DecomposedArtifact;

pub mod embed;
pub mod http;
pub mod offline;

pub use embed::{HashingEmbedder, IndicatorEmbedder};
pub use http::{HttpConfig, HttpEmbedder, HttpEncoder, HttpGenerator};
pub use offline::{EmissionLog, NoisyOracle, NoisyOracleConfig, OracleGenerator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Generation,
    Embedding,
    Encoding,
}

impl Capability {
    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Generation => "generation",
            Capability::Embedding => "embedding",
            Capability::Encoding => "encoding",
        }
    }
}

/// Stable identity of a configured backend, echoed into caches and reports.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BackendFingerprint {
    pub capability: Capability,
    pub provider: String,
    pub model: String,
    pub config_hash: String,
}

impl BackendFingerprint {
    pub fn new(capability: Capability, provider: &str, model: &str, config: &impl Serialize) -> Self {
        let bytes = serde_json::to_vec(config).expect("backend config serializes");
        BackendFingerprint {
            capability,
            provider: provider.to_string(),
            model: model.to_string(),
            config_hash: crate::seed::sha256_hex(&bytes)[..16].to_string(),
        }
    }

    /// Filesystem-safe identifier.
    pub fn id(&self) -> String {
        let clean = |s: &str| -> String {
            s.chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                        c
                    } else {
                        '_'
                    }
                })
                .collect()
        };
        format!(
            "{}-{}-{}",
            clean(&self.provider),
            clean(&self.model),
            self.config_hash
        )
    }
}

impl fmt::Display for BackendFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}/{}#{}",
            self.capability.as_str(),
            self.provider,
            self.model,
            self.config_hash
        )
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure: {message}")]
    Transport { message: String, retryable: bool },
    #[error("authorization failure: {0}")]
    Authorization(String),
    #[error("malformed response: {0}")]
    ResponseShape(String),
    #[error("missing credential: environment variable `{0}` is not set")]
    MissingCredential(String),
    #[error("empty output from backend")]
    EmptyOutput,
    #[error("{0}")]
    Invalid(String),
    #[error("cache error: {0}")]
    Cache(#[from] std::io::Error),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { retryable: true, .. })
    }
}

/// A prediction or rendering request. Only the prompt carries content;
/// the remaining fields identify the call for seeding, caching and the
/// oracle family's gold lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub instance_id: Option<String>,
    pub run: u32,
    pub seed: u64,
    pub temperature: f64,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            instance_id: None,
            run: 0,
            seed: 0,
            temperature: 0.0,
        }
    }
}

pub trait Generator: Send + Sync {
    fn fingerprint(&self) -> BackendFingerprint;

    fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError>;

    /// True when output does not depend on `run`; the harness then computes
    /// one effective run and copies it.
    fn is_deterministic(&self) -> bool {
        false
    }
}

pub trait Embedder: Send + Sync {
    fn fingerprint(&self) -> BackendFingerprint;

    fn dimension(&self) -> usize;

    /// One vector per input, order preserved.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;
}

pub trait MediaEncoder: Send + Sync {
    fn fingerprint(&self) -> BackendFingerprint;

    fn encode(&self, artifact: &Artifact) -> Result<DecomposedArtifact, BackendError>;
}

/// Cosine similarity in f64; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
