//! HTTP-backed capabilities.
//!
//! Wire contract: `POST <endpoint>` with a JSON body
//! `{"model": .., "input": .., "params": {..}}`.
//!
//! | capability | `input`            | response                        |
//! |------------|--------------------|---------------------------------|
//! | generation | prompt string      | `{"text": "..."}`               |
//! | embedding  | array of strings   | `{"embeddings": [[f64, ..], ..]}` |
//! | encoding   | artifact object    | `{"text_view": "..", "descriptors": {..}}` |
//!
//! The credential is read from the environment variable named in the
//! config and sent as a bearer token. Responses are cached on disk under
//! `<cache_dir>/<capability>/<fingerprint>/<input-hash>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    BackendError, BackendFingerprint, Capability, Embedder, GenerationRequest, Generator, MediaEncoder,
};
use crate::corpus::Artifact;
use crate::decompose::DecomposedArtifact;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    pub provider: String,
    /// Name of the environment variable holding the API credential.
    pub api_key_env: Option<String>,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub cache_dir: Option<PathBuf>,
    /// Log full request bodies instead of hashes.
    pub log_full: bool,
    /// Output dimension, required for embedding backends.
    pub dimension: Option<usize>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: String::new(),
            model: String::new(),
            provider: "http".into(),
            api_key_env: None,
            max_retries: 3,
            backoff_ms: 250,
            timeout_secs: 120,
            max_in_flight: 4,
            cache_dir: Some(PathBuf::from("cache")),
            log_full: false,
            dimension: None,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
struct InFlight {
    count: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl InFlight {
    fn new(cap: usize) -> Self {
        InFlight {
            count: Mutex::new(0),
            freed: Condvar::new(),
            cap: cap.max(1),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.count.lock().expect("in-flight lock");
        while *n >= self.cap {
            n = self.freed.wait(n).expect("in-flight lock");
        }
        *n += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.count.lock().expect("in-flight lock") -= 1;
        self.0.freed.notify_one();
    }
}

/// Shared transport: credentials, retries with exponential backoff,
/// in-flight cap and the response cache.
struct Transport {
    cfg: HttpConfig,
    fingerprint: BackendFingerprint,
    credential: Option<String>,
    agent: ureq::Agent,
    in_flight: InFlight,
    cache_lock: Mutex<()>,
}

#[derive(Serialize)]
struct FingerprintView<'a> {
    endpoint: &'a str,
    model: &'a str,
    dimension: Option<usize>,
}

impl Transport {
    fn new(capability: Capability, cfg: HttpConfig) -> Result<Self, BackendError> {
        if cfg.endpoint.is_empty() {
            return Err(BackendError::Invalid("http backend needs an endpoint".into()));
        }
        let credential = match &cfg.api_key_env {
            Some(var) => match std::env::var(var) {
                Ok(v) if !v.is_empty() => Some(v),
                _ => return Err(BackendError::MissingCredential(var.clone())),
            },
            None => None,
        };
        let fingerprint = BackendFingerprint::new(
            capability,
            &cfg.provider,
            &cfg.model,
            &FingerprintView {
                endpoint: &cfg.endpoint,
                model: &cfg.model,
                dimension: cfg.dimension,
            },
        );
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Transport {
            in_flight: InFlight::new(cfg.max_in_flight),
            cfg,
            fingerprint,
            credential,
            agent,
            cache_lock: Mutex::new(()),
        })
    }

    fn cache_path(&self, body: &[u8]) -> Option<PathBuf> {
        self.cfg.cache_dir.as_ref().map(|dir| {
            dir.join(self.fingerprint.capability.as_str())
                .join(self.fingerprint.id())
                .join(seed::sha256_hex(body))
        })
    }

    fn post(&self, input: Value, params: Value) -> Result<Value, BackendError> {
        let body = json!({ "model": self.cfg.model, "input": input, "params": params });
        let bytes = serde_json::to_vec(&body).expect("request serializes");
        let hash = seed::sha256_hex(&bytes);
        if self.cfg.log_full {
            debug!("{} request {}: {}", self.fingerprint, hash, body);
        } else {
            debug!("{} request {}", self.fingerprint, hash);
        }

        let cache = self.cache_path(&bytes);
        if let Some(path) = &cache {
            if let Ok(text) = fs::read_to_string(path) {
                if let Ok(v) = serde_json::from_str(&text) {
                    debug!("{} cache hit {}", self.fingerprint, hash);
                    return Ok(v);
                }
            }
        }

        let value = self.send_with_retries(&body)?;

        if let Some(path) = cache {
            let _guard = self.cache_lock.lock().expect("cache lock");
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, serde_json::to_vec(&value).expect("response serializes"))?;
            fs::rename(&tmp, &path)?;
        }
        Ok(value)
    }

    fn send_with_retries(&self, body: &Value) -> Result<Value, BackendError> {
        let mut attempt = 0;
        loop {
            let result = {
                let _slot = self.in_flight.acquire();
                self.send_once(body)
            };
            match result {
                Err(e) if e.is_retryable() && attempt < self.cfg.max_retries => {
                    let wait = self.cfg.backoff_ms.saturating_mul(1 << attempt.min(16));
                    warn!("{}: {e}; retrying in {wait} ms", self.fingerprint);
                    std::thread::sleep(Duration::from_millis(wait));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn send_once(&self, body: &Value) -> Result<Value, BackendError> {
        let mut req = self.agent.post(&self.cfg.endpoint);
        if let Some(key) = &self.credential {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| BackendError::Transport {
            message: e.to_string(),
            retryable: true,
        })?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => resp
                .body_mut()
                .read_json::<Value>()
                .map_err(|e| BackendError::ResponseShape(e.to_string())),
            401 | 403 => Err(BackendError::Authorization(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => Err(BackendError::Transport {
                message: format!("HTTP {status}"),
                retryable: true,
            }),
            _ => Err(BackendError::Transport {
                message: format!("HTTP {status}"),
                retryable: false,
            }),
        }
    }
}

pub struct HttpGenerator {
    transport: Transport,
}

impl HttpGenerator {
    pub fn new(cfg: HttpConfig) -> Result<Self, BackendError> {
        Ok(HttpGenerator {
            transport: Transport::new(Capability::Generation, cfg)?,
        })
    }
}

impl Generator for HttpGenerator {
    fn fingerprint(&self) -> BackendFingerprint {
        self.transport.fingerprint.clone()
    }

    fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError> {
        if req.prompt.trim().is_empty() {
            return Err(BackendError::Invalid("prompt is empty".into()));
        }
        let params = json!({ "seed": req.seed, "run": req.run, "temperature": req.temperature });
        let v = self.transport.post(Value::String(req.prompt.clone()), params)?;
        v.get("text")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::ResponseShape("expected string field `text`".into()))
    }
}

pub struct HttpEmbedder {
    transport: Transport,
    dimension: usize,
}

impl HttpEmbedder {
    pub fn new(cfg: HttpConfig) -> Result<Self, BackendError> {
        let dimension = cfg
            .dimension
            .ok_or_else(|| BackendError::Invalid("http embedder needs `dimension`".into()))?;
        Ok(HttpEmbedder {
            transport: Transport::new(Capability::Embedding, cfg)?,
            dimension,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn fingerprint(&self) -> BackendFingerprint {
        self.transport.fingerprint.clone()
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        if texts.is_empty() {
            return Err(BackendError::Invalid("embedding batch is empty".into()));
        }
        let v = self.transport.post(json!(texts), json!({}))?;
        let rows: Vec<Vec<f64>> = v
            .get("embeddings")
            .cloned()
            .and_then(|e| serde_json::from_value(e).ok())
            .ok_or_else(|| BackendError::ResponseShape("expected `embeddings` matrix".into()))?;
        if rows.len() != texts.len() {
            return Err(BackendError::ResponseShape(format!(
                "{} embeddings for {} inputs",
                rows.len(),
                texts.len()
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != self.dimension) {
            return Err(BackendError::ResponseShape(format!(
                "embedding of dimension {}, expected {}",
                bad.len(),
                self.dimension
            )));
        }
        Ok(rows)
    }
}

pub struct HttpEncoder {
    transport: Transport,
}

impl HttpEncoder {
    pub fn new(cfg: HttpConfig) -> Result<Self, BackendError> {
        Ok(HttpEncoder {
            transport: Transport::new(Capability::Encoding, cfg)?,
        })
    }
}

#[derive(Deserialize)]
struct EncodingResponse {
    text_view: String,
    #[serde(default)]
    descriptors: BTreeMap<String, String>,
}

impl MediaEncoder for HttpEncoder {
    fn fingerprint(&self) -> BackendFingerprint {
        self.transport.fingerprint.clone()
    }

    fn encode(&self, artifact: &Artifact) -> Result<DecomposedArtifact, BackendError> {
        let v = self.transport.post(
            serde_json::to_value(artifact).expect("artifact serializes"),
            json!({}),
        )?;
        let r: EncodingResponse =
            serde_json::from_value(v).map_err(|e| BackendError::ResponseShape(e.to_string()))?;
        if r.text_view.trim().is_empty() {
            return Err(BackendError::EmptyOutput);
        }
        Ok(DecomposedArtifact {
            artifact_id: artifact.artifact_id.clone(),
            modality: artifact.modality,
            genre: artifact.genre().to_string(),
            text_view: r.text_view,
            descriptors: r.descriptors,
        })
    }
}
