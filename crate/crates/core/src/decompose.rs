//! Modality decomposition: every artifact becomes a text view plus
//! descriptors before it reaches a predictor or an embedder.
//!
//! Synthetic image and audio artifacts store a descriptor stub as their
//! content, one `key: value` per line:
//!
//! ```text
//! scene: elise at the office during the morning     (image)
//! tags: office, morning, elise
//!
//! transcript: ...                                     (audio)
//! voice_tremor: high
//! ```
//!
//! The offline encoder parses these stubs. Live encoders plug in through
//! [`MediaEncoder`] and see only the artifact, never a gold graph.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, BackendFingerprint, Capability, MediaEncoder};
use crate::corpus::{Artifact, Modality};

pub const DEFAULT_AUDIO_DESCRIPTORS: [&str; 5] = ["voice_tremor", "loudness", "tempo", "pitch", "pause_rate"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecomposedArtifact {
    pub artifact_id: String,
    pub modality: Modality,
    pub genre: String,
    pub text_view: String,
    pub descriptors: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("no encoder configured for {0} artifacts")]
    MissingEncoder(Modality),
    #[error("artifact `{artifact_id}`: {source}")]
    Encoder {
        artifact_id: String,
        #[source]
        source: BackendError,
    },
}

/// Parses the descriptor stubs stored in synthetic image/audio artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct StubEncoder {
    audio_descriptors: BTreeSet<String>,
}

impl Default for StubEncoder {
    fn default() -> Self {
        StubEncoder::new(DEFAULT_AUDIO_DESCRIPTORS.iter().map(|s| s.to_string()))
    }
}

impl StubEncoder {
    pub fn new(audio_descriptors: impl IntoIterator<Item = String>) -> Self {
        StubEncoder {
            audio_descriptors: audio_descriptors.into_iter().collect(),
        }
    }

    pub fn audio_descriptors(&self) -> &BTreeSet<String> {
        &self.audio_descriptors
    }
}

fn parse_stub(content: &str) -> Result<BTreeMap<String, String>, BackendError> {
    let mut fields = BTreeMap::new();
    for line in content.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once(':')
            .ok_or_else(|| BackendError::ResponseShape(format!("stub line without key: `{line}`")))?;
        fields.insert(k.trim().to_lowercase(), v.trim().to_string());
    }
    Ok(fields)
}

impl MediaEncoder for StubEncoder {
    fn fingerprint(&self) -> BackendFingerprint {
        BackendFingerprint::new(Capability::Encoding, "offline", "stub", self)
    }

    fn encode(&self, artifact: &Artifact) -> Result<DecomposedArtifact, BackendError> {
        let mut fields = parse_stub(&artifact.content)?;
        let view_key = match artifact.modality {
            Modality::Image => "scene",
            Modality::Audio => "transcript",
            Modality::Text => return Err(BackendError::Invalid("text artifacts need no encoder".into())),
        };
        let text_view = fields
            .remove(view_key)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| BackendError::ResponseShape(format!("stub has no `{view_key}` line")))?;
        match artifact.modality {
            Modality::Image => {
                if !fields.contains_key("tags") {
                    return Err(BackendError::ResponseShape(
                        "image stub has no `tags` line".into(),
                    ));
                }
                // scene summary is also kept as a descriptor
                fields.insert("scene".into(), text_view.clone());
            }
            Modality::Audio => {
                if let Some(bad) = fields.keys().find(|k| !self.audio_descriptors.contains(*k)) {
                    return Err(BackendError::ResponseShape(format!(
                        "audio descriptor `{bad}` is not in the configured vocabulary"
                    )));
                }
            }
            Modality::Text => unreachable!(),
        }
        Ok(DecomposedArtifact {
            artifact_id: artifact.artifact_id.clone(),
            modality: artifact.modality,
            genre: artifact.genre().to_string(),
            text_view,
            descriptors: fields,
        })
    }
}

/// Encoders per non-text modality.
#[derive(Clone, Default)]
pub struct Encoders {
    pub image: Option<Arc<dyn MediaEncoder>>,
    pub audio: Option<Arc<dyn MediaEncoder>>,
}

impl Encoders {
    /// Stub encoders for both image and audio.
    pub fn offline() -> Self {
        let stub: Arc<dyn MediaEncoder> = Arc::new(StubEncoder::default());
        Encoders {
            image: Some(stub.clone()),
            audio: Some(stub),
        }
    }

    pub fn fingerprints(&self) -> Vec<BackendFingerprint> {
        self.image
            .iter()
            .chain(self.audio.iter())
            .map(|e| e.fingerprint())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

pub fn decompose(a: &Artifact, encoders: &Encoders) -> Result<DecomposedArtifact, DecomposeError> {
    let encoder = match a.modality {
        Modality::Text => {
            return Ok(DecomposedArtifact {
                artifact_id: a.artifact_id.clone(),
                modality: Modality::Text,
                genre: a.genre().to_string(),
                text_view: a.content.clone(),
                descriptors: BTreeMap::new(),
            })
        }
        Modality::Image => encoders.image.as_ref(),
        Modality::Audio => encoders.audio.as_ref(),
    };
    let encoder = encoder.ok_or(DecomposeError::MissingEncoder(a.modality))?;
    encoder.encode(a).map_err(|source| DecomposeError::Encoder {
        artifact_id: a.artifact_id.clone(),
        source,
    })
}

pub fn decompose_bundle(
    bundle: &[Artifact],
    encoders: &Encoders,
) -> Result<Vec<DecomposedArtifact>, DecomposeError> {
    bundle.iter().map(|a| decompose(a, encoders)).collect()
}

/// Concatenate in bundle order, each artifact under a
/// `[modality | genre | artifact_id]` header followed by its text view and
/// then its descriptors as `key: value` lines.
pub fn flatten_bundle(parts: &[DecomposedArtifact]) -> String {
    let mut out = String::new();
    for (i, d) in parts.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("[{} | {} | {}]\n", d.modality, d.genre, d.artifact_id));
        out.push_str(d.text_view.trim_end());
        out.push('\n');
        for (k, v) in &d.descriptors {
            if d.modality == Modality::Image && k == "scene" {
                continue;
            }
            out.push_str(&format!("{k}: {v}\n"));
        }
    }
    out
}
