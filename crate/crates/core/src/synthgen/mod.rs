//! Structure-first synthetic generation.
//!
//! A graph is sampled from the schema first; artifacts are then rendered
//! conditioned on that graph, so gold labels and evidence agree by
//! construction. Every instance draws its randomness from streams derived
//! from `(seed, instance index)`, which makes the corpus independent of
//! execution order.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::BackendError;
use crate::corpus::{Corpus, Instance, Node, SituationGraph, Triplet, DEFAULT_DOMAINS};
use crate::ontology::{CompletenessRule, RuleTarget, SchemaDef};
use crate::seed;

mod render;

pub use render::{surface_coverage, ArtifactRenderer, CueTable, ExternalRenderer, TemplateRenderer, GENRES};

/// Consecutive rejected draws tolerated before sampling gives up.
pub const MAX_REJECTIONS: usize = 1_000;

pub type Persona = BTreeMap<String, String>;

pub fn default_persona() -> Persona {
    [
        ("name", "Elise Navarro"),
        ("age", "28"),
        ("background", "Filipino"),
        ("city", "Toronto"),
        ("occupation", "Senior Marketing Analyst"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainWeight {
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RendererKind {
    Template,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub n_instances: usize,
    pub domains: Vec<DomainWeight>,
    /// Inclusive triplet-count range; defaults to the schema bounds.
    pub triplet_count_range: Option<(usize, usize)>,
    /// Inclusive artifacts-per-instance range.
    pub artifacts_per_instance: (usize, usize),
    pub renderer: RendererKind,
    /// Probability that a rendered artifact is an image descriptor.
    pub image_rate: f64,
    /// Probability that a rendered artifact is an audio descriptor.
    pub audio_rate: f64,
    /// Calendar metadata only: first year and span of the timeline.
    pub start_year: u32,
    pub span_months: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 42,
            n_instances: 75,
            domains: DEFAULT_DOMAINS
                .iter()
                .map(|d| DomainWeight {
                    name: d.to_string(),
                    weight: 1.0,
                })
                .collect(),
            triplet_count_range: None,
            artifacts_per_instance: (3, 3),
            renderer: RendererKind::Template,
            image_rate: 0.1,
            audio_rate: 0.1,
            start_year: 2021,
            span_months: 60,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error("unsatisfiable configuration: {0}")]
    Unsatisfiable(String),
    #[error("instance {instance}: gave up after {MAX_REJECTIONS} consecutive rejected draws")]
    RejectionCap { instance: String },
    #[error("renderer failed: {0}")]
    Renderer(#[from] BackendError),
    #[error("instance {instance}: rendered artifacts omit surface names {missing:?}")]
    CoverageRejected { instance: String, missing: Vec<String> },
}

impl GenConfig {
    pub fn triplet_range(&self, schema: &SchemaDef) -> (usize, usize) {
        self.triplet_count_range
            .unwrap_or((schema.min_triplets(), schema.max_triplets()))
    }

    pub fn domain_names(&self) -> Vec<String> {
        self.domains.iter().map(|d| d.name.clone()).collect()
    }

    pub fn validate(&self, schema: &SchemaDef) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.domains.is_empty() {
            return bad("at least one domain is required".into());
        }
        let mut names = BTreeSet::new();
        for d in &self.domains {
            if d.name.trim().is_empty() || !names.insert(d.name.as_str()) {
                return bad(format!(
                    "domain names must be unique and non-empty (`{}`)",
                    d.name
                ));
            }
            if !(d.weight.is_finite() && d.weight > 0.0) {
                return bad(format!(
                    "domain `{}` has non-positive weight {}",
                    d.name, d.weight
                ));
            }
        }
        let (lo, hi) = self.triplet_range(schema);
        if lo > hi || lo < schema.min_triplets() || hi > schema.max_triplets() {
            return bad(format!(
                "triplet_count_range [{lo}, {hi}] must be non-empty and within [{}, {}]",
                schema.min_triplets(),
                schema.max_triplets()
            ));
        }
        let (alo, ahi) = self.artifacts_per_instance;
        if alo == 0 || alo > ahi {
            return bad(format!(
                "artifacts_per_instance [{alo}, {ahi}] must be non-empty and >= 1"
            ));
        }
        for (name, r) in [("image_rate", self.image_rate), ("audio_rate", self.audio_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} = {r} is outside [0, 1]"));
            }
        }
        if self.image_rate + self.audio_rate > 1.0 {
            return bad("image_rate + audio_rate exceeds 1".into());
        }
        Ok(())
    }
}

/// A conforming (predicate, subject kind, object kind) choice.
type Slot = (String, String, String);

fn rule_slots(schema: &SchemaDef, rule: &CompletenessRule) -> Vec<Vec<Slot>> {
    let ids: BTreeSet<String> = rule
        .id
        .ids()
        .iter()
        .map(|i| crate::corpus::canonical(i))
        .collect();
    match rule.target {
        // one group per predicate: pick the predicate first, then its pair
        RuleTarget::Predicate => schema
            .predicate_ids()
            .iter()
            .filter(|p| ids.contains(*p))
            .map(|p| {
                schema
                    .arity(p)
                    .unwrap_or_default()
                    .iter()
                    .map(|(s, o)| (p.clone(), s.clone(), o.clone()))
                    .collect()
            })
            .collect(),
        RuleTarget::ObjectKind => {
            let slots: Vec<Slot> = schema
                .predicate_ids()
                .iter()
                .flat_map(|p| {
                    schema
                        .arity(p)
                        .unwrap_or_default()
                        .iter()
                        .filter(|(_, o)| ids.contains(o))
                        .map(move |(s, o)| (p.clone(), s.clone(), o.clone()))
                })
                .collect();
            if slots.is_empty() {
                vec![]
            } else {
                vec![slots]
            }
        }
    }
}

/// Fails when completeness rules cannot be met inside the triplet budget.
pub fn check_feasible(schema: &SchemaDef, cfg: &GenConfig) -> Result<(), SynthError> {
    cfg.validate(schema)?;
    let (_, hi) = cfg.triplet_range(schema);
    let rules = schema.completeness_rules();
    if rules.len() > hi {
        return Err(SynthError::Unsatisfiable(format!(
            "{} completeness rules need at least {} triplets but the budget allows at most {hi}",
            rules.len(),
            rules.len()
        )));
    }
    for rule in rules {
        if rule_slots(schema, rule).is_empty() {
            return Err(SynthError::Unsatisfiable(format!(
                "no predicate/arity pair can satisfy rule `{}`",
                rule.label()
            )));
        }
    }
    Ok(())
}

fn draw_node(schema: &SchemaDef, kind: &str, rng: &mut ChaCha8Rng) -> Node {
    let vocab = schema.vocabulary(kind).expect("arity kinds are declared");
    Node::new(kind, &vocab[seed::index(rng, vocab.len())])
}

fn draw_from_slot(schema: &SchemaDef, slot: &Slot, rng: &mut ChaCha8Rng) -> Triplet {
    let (p, s, o) = slot;
    Triplet::new(draw_node(schema, s, rng), p, draw_node(schema, o, rng))
}

/// Sample one graph from the uniform prior.
///
/// 1. one conforming triplet per completeness rule;
/// 2. a total count drawn uniformly from the configured range;
/// 3. uniform predicate, arity pair and names until the count is reached,
///    rejecting duplicates and self-loops.
pub fn sample_graph(
    schema: &SchemaDef,
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
    instance_id: &str,
    time_index: u64,
) -> Result<SituationGraph, SynthError> {
    let (lo, hi) = cfg.triplet_range(schema);
    let mut seen = BTreeSet::new();
    let mut triplets = Vec::with_capacity(hi);
    let cap = || SynthError::RejectionCap {
        instance: instance_id.to_string(),
    };
    let mut accept = |t: Triplet, triplets: &mut Vec<Triplet>| {
        if t.subject != t.object && seen.insert(t.clone()) {
            triplets.push(t);
            true
        } else {
            false
        }
    };

    for rule in schema.completeness_rules() {
        let groups = rule_slots(schema, rule);
        if groups.is_empty() {
            return Err(SynthError::Unsatisfiable(rule.label()));
        }
        let mut rejected = 0;
        loop {
            let group = &groups[seed::index(rng, groups.len())];
            let slot = &group[seed::index(rng, group.len())];
            if accept(draw_from_slot(schema, slot, rng), &mut triplets) {
                break;
            }
            rejected += 1;
            if rejected >= MAX_REJECTIONS {
                return Err(cap());
            }
        }
    }

    let total = seed::inclusive(rng, lo.max(triplets.len()), hi);
    let preds = schema.predicate_ids();
    let mut rejected = 0;
    while triplets.len() < total {
        let p = &preds[seed::index(rng, preds.len())];
        let arity = schema.arity(p).expect("declared predicate");
        let (s, o) = &arity[seed::index(rng, arity.len())];
        let slot = (p.clone(), s.clone(), o.clone());
        if accept(draw_from_slot(schema, &slot, rng), &mut triplets) {
            rejected = 0;
        } else {
            rejected += 1;
            if rejected >= MAX_REJECTIONS {
                return Err(cap());
            }
        }
    }

    Ok(SituationGraph {
        instance_id: instance_id.to_string(),
        time_index,
        triplets,
    })
}

/// Width-padded id so that lexicographic order matches index order.
pub fn instance_id(index: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len().max(4);
    format!("inst-{index:0width$}")
}

fn calendar_month(cfg: &GenConfig, index: usize) -> String {
    let n = cfg.n_instances.max(1) as u64;
    let offset = index as u64 * cfg.span_months.max(1) as u64 / n;
    let year = cfg.start_year as u64 + offset / 12;
    format!("{year:04}-{:02}", offset % 12 + 1)
}

/// Sample the graph for instance `index` using its derived stream.
pub fn sample_instance_graph(
    schema: &SchemaDef,
    cfg: &GenConfig,
    index: usize,
) -> Result<SituationGraph, SynthError> {
    let id = instance_id(index, cfg.n_instances);
    let mut rng = seed::stream(cfg.seed, &["graph", &index.to_string()]);
    sample_graph(schema, cfg, &mut rng, &id, index as u64)
}

/// Render the artifact bundle for a graph.
pub fn render_artifacts(
    g: &SituationGraph,
    persona: &Persona,
    domain: &str,
    cfg: &GenConfig,
    renderer: &dyn ArtifactRenderer,
) -> Result<Vec<crate::corpus::Artifact>, SynthError> {
    let mut rng = seed::stream(cfg.seed, &["render", &g.instance_id]);
    renderer.render(g, persona, domain, cfg, &mut rng)
}

pub fn generate_corpus(
    schema: &SchemaDef,
    cfg: &GenConfig,
    persona: &Persona,
    renderer: &dyn ArtifactRenderer,
) -> Result<Corpus, SynthError> {
    check_feasible(schema, cfg)?;
    let weights = WeightedIndex::new(cfg.domains.iter().map(|d| d.weight))
        .map_err(|e| SynthError::Config(e.to_string()))?;

    let instances = (0..cfg.n_instances)
        .into_par_iter()
        .map(|index| {
            let mut drng = seed::stream(cfg.seed, &["domain", &index.to_string()]);
            let domain = cfg.domains[weights.sample(&mut drng)].name.clone();
            let gold = sample_instance_graph(schema, cfg, index)?;
            let mut artifacts = render_artifacts(&gold, persona, &domain, cfg, renderer)?;
            let month = calendar_month(cfg, index);
            for a in &mut artifacts {
                a.meta.insert("date".into(), month.clone());
                a.meta.insert("domain".into(), domain.clone());
            }
            Ok(Instance {
                instance_id: gold.instance_id.clone(),
                time_index: gold.time_index,
                domain,
                artifacts,
                gold,
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;

    Ok(Corpus {
        persona: persona.clone(),
        domains: cfg.domain_names(),
        schema_ref: schema.fingerprint(),
        provenance: BTreeMap::from([(
            "generator".to_string(),
            serde_json::to_value(cfg).map_err(|e| SynthError::Config(e.to_string()))?,
        )]),
        instances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{load_schema, validate_graph};

    #[test]
    fn sampled_graphs_validate_and_repeat() {
        let schema = SchemaDef::default_schema();
        let cfg = GenConfig::default();
        for i in 0..200 {
            let g = sample_instance_graph(&schema, &cfg, i).unwrap();
            assert!(
                validate_graph(&schema, &g).is_empty(),
                "{:?}",
                validate_graph(&schema, &g)
            );
            assert_eq!(g, sample_instance_graph(&schema, &cfg, i).unwrap());
        }
    }

    #[test]
    fn infeasible_budget_is_reported_before_sampling() {
        let schema = SchemaDef::default_schema();
        let narrow = load_schema(
            &schema
                .to_json()
                .replace("\"max_triplets\": 18", "\"max_triplets\": 3")
                .replace("\"min_triplets\": 6", "\"min_triplets\": 1"),
        )
        .unwrap();
        let cfg = GenConfig::default();
        assert!(matches!(
            check_feasible(&narrow, &cfg),
            Err(SynthError::Unsatisfiable(_))
        ));
    }

    #[test]
    fn out_of_bounds_range_is_a_config_error() {
        let schema = SchemaDef::default_schema();
        let cfg = GenConfig {
            triplet_count_range: Some((4, 12)),
            ..Default::default()
        };
        assert!(matches!(cfg.validate(&schema), Err(SynthError::Config(_))));
    }

    #[test]
    fn instance_ids_sort_by_index() {
        assert_eq!(instance_id(7, 75), "inst-0007");
        assert_eq!(instance_id(7, 10_001), "inst-00007");
        assert!(instance_id(999, 10_000) < instance_id(1000, 10_000));
    }

    #[test]
    fn calendar_spans_the_timeline() {
        let cfg = GenConfig::default();
        assert_eq!(calendar_month(&cfg, 0), "2021-01");
        assert_eq!(calendar_month(&cfg, 74), "2025-12");
    }
}
