//! Backend selection from a JSON file.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sgp_core::backends::Embedder;
use sgp_core::backends::{
    Generator, HashingEmbedder, HttpConfig, HttpEmbedder, HttpEncoder, HttpGenerator, IndicatorEmbedder,
    MediaEncoder, NoisyOracle, NoisyOracleConfig, OracleGenerator,
};
use sgp_core::decompose::{Encoders, StubEncoder};
use sgp_core::harness::Backends;
use sgp_core::{Corpus, SchemaDef};

fn default_dimension() -> usize {
    sgp_core::backends::embed::DEFAULT_DIMENSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PredictorChoice {
    Oracle,
    NoisyOracle(NoisyOracleConfig),
    Http(HttpConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EmbedderChoice {
    Hashing {
        #[serde(default = "default_dimension")]
        dimension: usize,
        #[serde(default)]
        seed: u64,
    },
    Indicator {
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    Http(HttpConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EncoderChoice {
    Stub,
    None,
    Http(HttpConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendsConfig {
    pub predictor: PredictorChoice,
    pub embedder: EmbedderChoice,
    pub image_encoder: EncoderChoice,
    pub audio_encoder: EncoderChoice,
    /// Generator for the external artifact renderer.
    pub renderer: Option<HttpConfig>,
}

impl Default for BackendsConfig {
    fn default() -> Self {
        BackendsConfig {
            predictor: PredictorChoice::Oracle,
            embedder: EmbedderChoice::Hashing {
                dimension: default_dimension(),
                seed: 0,
            },
            image_encoder: EncoderChoice::Stub,
            audio_encoder: EncoderChoice::Stub,
            renderer: None,
        }
    }
}

impl BackendsConfig {
    /// Replace the predictor by name. A config-file section of the same
    /// type is kept so its parameters still apply.
    pub fn override_predictor(&mut self, name: &str) -> Result<()> {
        self.predictor = match (name, &self.predictor) {
            ("oracle", _) => PredictorChoice::Oracle,
            ("noisy_oracle", PredictorChoice::NoisyOracle(c)) => PredictorChoice::NoisyOracle(c.clone()),
            ("noisy_oracle", _) => PredictorChoice::NoisyOracle(NoisyOracleConfig::default()),
            ("http", PredictorChoice::Http(c)) => PredictorChoice::Http(c.clone()),
            ("http", _) => bail!("--backend http needs a predictor of type http in the backends config"),
            (other, _) => bail!("unknown backend `{other}` (expected oracle, noisy_oracle or http)"),
        };
        Ok(())
    }

    /// Turn on full request logging for every HTTP section.
    pub fn set_log_full(&mut self) {
        let mut sections: Vec<&mut HttpConfig> = Vec::new();
        if let PredictorChoice::Http(c) = &mut self.predictor {
            sections.push(c);
        }
        if let EmbedderChoice::Http(c) = &mut self.embedder {
            sections.push(c);
        }
        for e in [&mut self.image_encoder, &mut self.audio_encoder] {
            if let EncoderChoice::Http(c) = e {
                sections.push(c);
            }
        }
        if let Some(c) = &mut self.renderer {
            sections.push(c);
        }
        for c in sections {
            c.log_full = true;
        }
    }

    fn encoder(choice: &EncoderChoice) -> Result<Option<Arc<dyn MediaEncoder>>> {
        Ok(match choice {
            EncoderChoice::Stub => Some(Arc::new(StubEncoder::default())),
            EncoderChoice::None => None,
            EncoderChoice::Http(c) => Some(Arc::new(HttpEncoder::new(c.clone()).context("encoder backend")?)),
        })
    }

    /// Construct every backend. Live backends check their credential here,
    /// before any request is made.
    pub fn build(&self, schema: &SchemaDef, corpus: &Corpus) -> Result<Backends> {
        let predictor: Arc<dyn Generator> = match &self.predictor {
            PredictorChoice::Oracle => Arc::new(OracleGenerator::from_corpus(corpus)),
            PredictorChoice::NoisyOracle(c) => {
                Arc::new(NoisyOracle::new(schema, corpus, c.clone()).context("noisy_oracle predictor")?)
            }
            PredictorChoice::Http(c) => Arc::new(HttpGenerator::new(c.clone()).context("predictor backend")?),
        };
        let embedder: Arc<dyn Embedder> = match &self.embedder {
            EmbedderChoice::Hashing { dimension, seed } => {
                if *dimension == 0 {
                    bail!("embedder dimension must be positive");
                }
                Arc::new(HashingEmbedder::new(*dimension, *seed))
            }
            EmbedderChoice::Indicator { dimension } => {
                if *dimension == 0 {
                    bail!("embedder dimension must be positive");
                }
                Arc::new(IndicatorEmbedder::new(*dimension))
            }
            EmbedderChoice::Http(c) => Arc::new(HttpEmbedder::new(c.clone()).context("embedder backend")?),
        };
        Ok(Backends {
            predictor,
            embedder,
            encoders: Encoders {
                image: Self::encoder(&self.image_encoder)?,
                audio: Self::encoder(&self.audio_encoder)?,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let c: BackendsConfig =
            serde_json::from_str(r#"{"predictor": {"type": "noisy_oracle", "drop_rate_latent": 0.5}}"#)
                .unwrap();
        match &c.predictor {
            PredictorChoice::NoisyOracle(n) => assert_eq!(n.drop_rate_latent, 0.5),
            other => panic!("{other:?}"),
        }
        assert_eq!(c.embedder, BackendsConfig::default().embedder);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<BackendsConfig>(r#"{"predictr": {"type": "oracle"}}"#).is_err());
        assert!(serde_json::from_str::<BackendsConfig>(
            r#"{"predictor": {"type": "noisy_oracle", "drop": 0.5}}"#
        )
        .is_err());
    }

    #[test]
    fn override_keeps_matching_section() {
        let mut c: BackendsConfig =
            serde_json::from_str(r#"{"predictor": {"type": "noisy_oracle", "seed": 9}}"#).unwrap();
        c.override_predictor("noisy_oracle").unwrap();
        assert!(matches!(&c.predictor, PredictorChoice::NoisyOracle(n) if n.seed == 9));
        assert!(c.override_predictor("http").is_err());
        c.override_predictor("oracle").unwrap();
        assert_eq!(c.predictor, PredictorChoice::Oracle);
    }
}
