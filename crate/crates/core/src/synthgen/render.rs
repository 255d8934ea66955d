//! Artifact renderers: the offline template renderer and a renderer backed
//! by a text-generation service with a surface-coverage gate.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{GenConfig, Persona, SynthError};
use crate::backends::{BackendError, GenerationRequest, Generator};
use crate::corpus::{canonical, Artifact, Modality, Node, SituationGraph, Triplet};
use crate::ontology::{SchemaDef, Stratum};
use crate::seed;

pub const GENRES: [&str; 4] = ["email", "chat_log", "calendar_entry", "social_post"];

const DEFAULT_CUES: &str = include_str!("../../data/cue_table.json");

pub trait ArtifactRenderer: Send + Sync {
    fn render(
        &self,
        g: &SituationGraph,
        persona: &Persona,
        domain: &str,
        cfg: &GenConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Artifact>, SynthError>;
}

/// Psychological value -> cue phrases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CueTable {
    cues: BTreeMap<String, Vec<String>>,
}

impl CueTable {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| SynthError::Config(format!("cue table: {e}")))?;
        Ok(CueTable {
            cues: raw
                .into_iter()
                .map(|(k, v)| {
                    (
                        canonical(&k),
                        v.into_iter().map(|p| p.trim().to_string()).collect(),
                    )
                })
                .collect(),
        })
    }

    pub fn default_table() -> Self {
        CueTable::from_json(DEFAULT_CUES).expect("shipped cue table parses")
    }

    pub fn phrases(&self, value: &str) -> &[String] {
        self.cues
            .get(&canonical(value))
            .map(Vec::as_slice)
            .unwrap_or_default()
    }

    /// Every psychological value in the schema needs at least one phrase.
    pub fn check_against(&self, schema: &SchemaDef) -> Result<(), SynthError> {
        for kind in schema.kinds_in(Stratum::Psychological) {
            for value in schema.vocabulary(kind).unwrap_or_default() {
                if self.phrases(value).iter().all(|p| p.is_empty()) {
                    return Err(SynthError::Config(format!(
                        "cue table has no phrases for {kind} value `{value}`"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn is_surface_node(schema: &SchemaDef, node: &Node) -> bool {
    schema.stratum_of(&node.kind) != Some(Stratum::Psychological)
}

/// Surface node names of `g` that appear in no artifact content.
pub fn surface_coverage(schema: &SchemaDef, g: &SituationGraph, bundle: &[Artifact]) -> Vec<String> {
    let contents: Vec<String> = bundle.iter().map(|a| a.content.to_lowercase()).collect();
    let names: BTreeSet<&str> = g
        .triplets
        .iter()
        .flat_map(|t| [&t.subject, &t.object])
        .filter(|n| is_surface_node(schema, n))
        .map(|n| n.name.as_str())
        .collect();
    names
        .into_iter()
        .filter(|name| !contents.iter().any(|c| c.contains(name)))
        .map(str::to_string)
        .collect()
}

fn first_name(persona: &Persona) -> String {
    persona
        .get("name")
        .and_then(|n| n.split_whitespace().next())
        .unwrap_or("me")
        .to_string()
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [&'a str]) -> &'a str {
    items[seed::index(rng, items.len())]
}

/// Slot-filling renderer. Surface names are written verbatim in canonical
/// form; latent states show up only as cue phrases.
pub struct TemplateRenderer {
    schema: SchemaDef,
    cues: CueTable,
}

impl TemplateRenderer {
    pub fn new(schema: &SchemaDef, cues: CueTable) -> Result<Self, SynthError> {
        cues.check_against(schema)?;
        Ok(TemplateRenderer {
            schema: schema.clone(),
            cues,
        })
    }

    pub fn with_default_cues(schema: &SchemaDef) -> Result<Self, SynthError> {
        TemplateRenderer::new(schema, CueTable::default_table())
    }

    fn cue(&self, value: &str, rng: &mut ChaCha8Rng) -> String {
        let phrases = self.cues.phrases(value);
        phrases[seed::index(rng, phrases.len())].clone()
    }

    fn surface_clause(&self, t: &Triplet, rng: &mut ChaCha8Rng) -> String {
        let (s, o) = (&t.subject.name, &t.object.name);
        match t.predicate.as_str() {
            "has_participant" => match pick(rng, &["a", "b"]) {
                "a" => format!("{o} was at the {s}"),
                _ => format!("the {s} with {o}"),
            },
            "has_role" => format!("{s} is there as {o}"),
            "affiliated_with" => format!("{s} from {o}"),
            "occurs_at" => match pick(rng, &["a", "b"]) {
                "a" => format!("the {s} is at the {o}"),
                _ => format!("{s} over at the {o}"),
            },
            "occurs_during" => format!("{s} in the {o}"),
            "involves_activity" => format!("the {s} means a lot of {o}"),
            "has_ambience" => format!("the {s} was {o}"),
            "has_context" => format!("the {s} is a {o} thing"),
            "interacts_with" => format!("{s} caught up with {o}"),
            "part_of" => format!("{s} as part of the {o}"),
            other => format!("{s} {} {o}", other.replace('_', " ")),
        }
    }

    fn latent_clause(&self, t: &Triplet, rng: &mut ChaCha8Rng) -> String {
        let mut names = Vec::new();
        let mut cues = Vec::new();
        // object cue first so every latent triplet carries its own value's cue
        for node in [&t.object, &t.subject] {
            if is_surface_node(&self.schema, node) {
                names.push(node.name.clone());
            } else if !self.cues.phrases(&node.name).is_empty() {
                cues.push(self.cue(&node.name, rng));
            }
        }
        names.reverse();
        match (names.is_empty(), cues.is_empty()) {
            (true, true) => format!(
                "{} {} {}",
                t.subject.name,
                t.predicate.replace('_', " "),
                t.object.name
            ),
            (true, false) => cues.join(", "),
            (false, true) => names.join(" and "),
            (false, false) => {
                let who = names.join(" and ");
                match pick(rng, &["a", "b", "c"]) {
                    "a" => format!("{who}: {}", cues.join(", ")),
                    "b" => format!("about the {who}, {}", cues.join(", ")),
                    _ => format!("{}, {who} again", cues.join(", ")),
                }
            }
        }
    }

    fn clause(&self, t: &Triplet, rng: &mut ChaCha8Rng) -> String {
        if self.schema.is_latent(t) {
            self.latent_clause(t, rng)
        } else {
            self.surface_clause(t, rng)
        }
    }

    fn wrap_text(
        &self,
        genre: &str,
        clauses: &[String],
        names: &[String],
        persona: &Persona,
        domain: &str,
        rng: &mut ChaCha8Rng,
    ) -> String {
        let me = first_name(persona);
        let topic = names.first().cloned().unwrap_or_else(|| "quick update".into());
        match genre {
            "email" => format!(
                "Subject: {topic}\n\nHi,\n\n{}.\n\nBest,\n{me}",
                clauses.join(". ")
            ),
            "chat_log" => clauses
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let hour = 8 + seed::index(rng, 12);
                    let speaker = if i % 2 == 0 { me.as_str() } else { "friend" };
                    format!("[{hour:02}:{:02}] {speaker}: {c}", (i * 7) % 60)
                })
                .collect::<Vec<_>>()
                .join("\n"),
            "calendar_entry" => format!("Calendar: {topic}\nNotes: {}.", clauses.join("; ")),
            _ => format!("{}. #{}", clauses.join(". "), domain.replace('_', "")),
        }
    }
}

impl ArtifactRenderer for TemplateRenderer {
    fn render(
        &self,
        g: &SituationGraph,
        persona: &Persona,
        domain: &str,
        cfg: &GenConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Artifact>, SynthError> {
        let (lo, hi) = cfg.artifacts_per_instance;
        let n = seed::inclusive(rng, lo, hi);

        let mut genres = GENRES;
        genres.shuffle(rng);
        let mut order: Vec<&Triplet> = g.triplets.iter().collect();
        order.shuffle(rng);

        let mut assigned: Vec<Vec<&Triplet>> = vec![Vec::new(); n];
        for (i, t) in order.into_iter().enumerate() {
            assigned[i % n].push(t);
        }

        let mut out = Vec::with_capacity(n);
        for (j, triplets) in assigned.into_iter().enumerate() {
            let genre = genres[j % genres.len()];
            let mut clauses: Vec<String> = triplets.iter().map(|t| self.clause(t, rng)).collect();
            if clauses.is_empty() {
                clauses.push("nothing much to report".into());
            }
            let names: Vec<String> = triplets
                .iter()
                .flat_map(|t| [&t.subject, &t.object])
                .filter(|n| is_surface_node(&self.schema, n))
                .map(|n| n.name.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();

            let u: f64 = rng.gen();
            let modality = if u < cfg.image_rate {
                Modality::Image
            } else if u < cfg.image_rate + cfg.audio_rate {
                Modality::Audio
            } else {
                Modality::Text
            };
            let content = match modality {
                Modality::Text => self.wrap_text(genre, &clauses, &names, persona, domain, rng),
                Modality::Image => format!(
                    "scene: {}\ntags: {}",
                    clauses.join(", "),
                    if names.is_empty() {
                        "candid".to_string()
                    } else {
                        names.join(", ")
                    }
                ),
                Modality::Audio => {
                    let negative = g.triplets.iter().any(|t| t.object.name == "negative");
                    let tremor = if negative { "high" } else { "low" };
                    let loudness = pick(rng, &["low", "medium", "high"]);
                    let tempo = pick(rng, &["slow", "steady", "fast"]);
                    format!(
                        "transcript: {}\nvoice_tremor: {tremor}\nloudness: {loudness}\ntempo: {tempo}",
                        clauses.join(". ")
                    )
                }
            };

            let mut meta = BTreeMap::new();
            meta.insert("genre".to_string(), genre.to_string());
            if modality != Modality::Text {
                let ext = if modality == Modality::Image { "jpg" } else { "m4a" };
                meta.insert(
                    "file_ref".to_string(),
                    format!("media/{}-a{j}.{ext}", g.instance_id),
                );
            }
            out.push(Artifact {
                artifact_id: format!("{}-a{j}", g.instance_id),
                modality,
                content,
                meta,
            });
        }
        Ok(out)
    }
}

/// Renderer backed by a text-generation service. A bundle is accepted only
/// if every surface name of the graph appears in it; otherwise the whole
/// bundle is regenerated, up to `max_retries` times.
pub struct ExternalRenderer {
    schema: SchemaDef,
    generator: Arc<dyn Generator>,
    pub max_retries: u32,
}

impl ExternalRenderer {
    pub fn new(schema: &SchemaDef, generator: Arc<dyn Generator>) -> Self {
        ExternalRenderer {
            schema: schema.clone(),
            generator,
            max_retries: 3,
        }
    }

    fn prompt(&self, g: &SituationGraph, persona: &Persona, genre: &str) -> String {
        let mut p = String::from("Situation graph (one triplet per line):\n");
        for t in &g.triplets {
            p.push_str(&t.to_grammar_line());
            p.push('\n');
        }
        p.push_str("\nPersona:\n");
        for (k, v) in persona {
            p.push_str(&format!("{k}: {v}\n"));
        }
        p.push_str(&format!(
            "\nWrite one {genre} written by or to this persona that is consistent with the graph. \
             Mention every non-psychological node name verbatim. Convey emotions and valence \
             only indirectly, never by naming them.\n"
        ));
        p
    }

    fn call(&self, req: &GenerationRequest) -> Result<String, BackendError> {
        let text = self.generator.generate(req)?;
        if text.trim().is_empty() {
            return Err(BackendError::EmptyOutput);
        }
        Ok(text)
    }
}

impl ArtifactRenderer for ExternalRenderer {
    fn render(
        &self,
        g: &SituationGraph,
        persona: &Persona,
        _domain: &str,
        cfg: &GenConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Artifact>, SynthError> {
        let (lo, hi) = cfg.artifacts_per_instance;
        let n = seed::inclusive(rng, lo, hi);
        let mut genres = GENRES;
        genres.shuffle(rng);
        let base_seed: u64 = rng.gen();

        let mut last_missing = Vec::new();
        for attempt in 0..=self.max_retries {
            let mut bundle = Vec::with_capacity(n);
            for j in 0..n {
                let genre = genres[j % genres.len()];
                let req = GenerationRequest {
                    prompt: self.prompt(g, persona, genre),
                    instance_id: None,
                    run: attempt,
                    seed: base_seed.wrapping_add(j as u64),
                    temperature: 0.7,
                };
                let content = match self.call(&req) {
                    Ok(c) => c,
                    Err(e) if e.is_retryable() && attempt < self.max_retries => {
                        last_missing.clear();
                        break;
                    }
                    Err(e) => return Err(SynthError::Renderer(e)),
                };
                bundle.push(Artifact {
                    artifact_id: format!("{}-a{j}", g.instance_id),
                    modality: Modality::Text,
                    content,
                    meta: BTreeMap::from([("genre".to_string(), genre.to_string())]),
                });
            }
            if bundle.len() < n {
                continue;
            }
            last_missing = surface_coverage(&self.schema, g, &bundle);
            if last_missing.is_empty() {
                return Ok(bundle);
            }
        }
        Err(SynthError::CoverageRejected {
            instance: g.instance_id.clone(),
            missing: last_missing,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::BackendFingerprint;
    use crate::synthgen::{render_artifacts, sample_instance_graph};
    use std::sync::atomic::{AtomicU32, Ordering};

    fn t(s: &str, p: &str, o: &str) -> Triplet {
        Triplet::parse_pair(s, p, o).unwrap()
    }

    fn office_graph() -> SituationGraph {
        SituationGraph {
            instance_id: "inst-0000".into(),
            time_index: 0,
            triplets: vec![
                t("Event:Interview", "occurs_at", "LocationType:Office"),
                t("Person:Elise", "feels", "Emotion:Stressed"),
                t("Event:Interview", "has_participant", "Person:Elise"),
            ],
        }
    }

    fn text_only() -> GenConfig {
        GenConfig {
            image_rate: 0.0,
            audio_rate: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn office_and_stress_cue_are_rendered() {
        let schema = SchemaDef::default_schema();
        let cues = CueTable::from_json(
            r#"{"stressed": ["deadline pressure"], "joy": ["yay"], "sadness": ["meh"],
            "anger": ["grr"], "fear": ["eek"], "calm": ["ok"], "positive": ["good"], "negative": ["bad"]}"#,
        )
        .unwrap();
        let r = TemplateRenderer::new(&schema, cues).unwrap();
        let bundle = render_artifacts(
            &office_graph(),
            &super::super::default_persona(),
            "professional",
            &text_only(),
            &r,
        )
        .unwrap();
        let all: String = bundle.iter().map(|a| a.content.to_lowercase()).collect();
        assert!(all.contains("office"));
        assert!(all.contains("deadline pressure"));
        assert!(!all.contains("stressed"));
    }

    #[test]
    fn empty_cue_list_fails_fast() {
        let schema = SchemaDef::default_schema();
        let mut text: serde_json::Value = serde_json::from_str(DEFAULT_CUES).unwrap();
        text["stressed"] = serde_json::json!([]);
        let cues = CueTable::from_json(&text.to_string()).unwrap();
        assert!(matches!(
            TemplateRenderer::new(&schema, cues),
            Err(SynthError::Config(_))
        ));
    }

    #[test]
    fn three_artifacts_get_distinct_genres() {
        let schema = SchemaDef::default_schema();
        let r = TemplateRenderer::with_default_cues(&schema).unwrap();
        let cfg = GenConfig::default();
        for i in 0..50 {
            let g = sample_instance_graph(&schema, &cfg, i).unwrap();
            let b = render_artifacts(&g, &super::super::default_persona(), "professional", &cfg, &r).unwrap();
            assert_eq!(b.len(), 3);
            let genres: BTreeSet<&str> = b.iter().map(|a| a.genre()).collect();
            assert_eq!(genres.len(), 3);
            assert!(genres.iter().all(|g| GENRES.contains(g)));
            assert!(surface_coverage(&schema, &g, &b).is_empty());
        }
    }

    /// Echoes the graph lines back, dropping them on the first `fail_first` calls.
    struct Echo {
        calls: AtomicU32,
        fail_first: u32,
    }

    impl Generator for Echo {
        fn fingerprint(&self) -> BackendFingerprint {
            BackendFingerprint::new(crate::backends::Capability::Generation, "test", "echo", &())
        }
        fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                return Ok("lovely weather".into());
            }
            Ok(req.prompt.clone())
        }
    }

    #[test]
    fn external_renderer_retries_until_coverage() {
        let schema = SchemaDef::default_schema();
        let cfg = GenConfig {
            artifacts_per_instance: (1, 1),
            ..Default::default()
        };
        let echo = Arc::new(Echo {
            calls: AtomicU32::new(0),
            fail_first: 2,
        });
        let r = ExternalRenderer::new(&schema, echo.clone());
        let b = render_artifacts(
            &office_graph(),
            &super::super::default_persona(),
            "professional",
            &cfg,
            &r,
        )
        .unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(echo.calls.load(Ordering::SeqCst), 3);

        let never = Arc::new(Echo {
            calls: AtomicU32::new(0),
            fail_first: u32::MAX,
        });
        let r = ExternalRenderer::new(&schema, never.clone());
        assert!(matches!(
            render_artifacts(
                &office_graph(),
                &super::super::default_persona(),
                "professional",
                &cfg,
                &r
            ),
            Err(SynthError::CoverageRejected { .. })
        ));
        assert_eq!(never.calls.load(Ordering::SeqCst), 4);
    }
}
