//! Situation-graph schema: node kinds, predicates, arity map and the
//! structural checks applied to triplets and whole graphs.
//!
//! All identifiers and names are compared in canonical form (trimmed,
//! lowercase). The declared spelling is kept for serialization so that a
//! schema round-trips unchanged.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{canonical, SituationGraph, Triplet};

const DEFAULT_SCHEMA: &str = include_str!("../data/default_schema.json");

/// The four semantic strata every node kind belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Participants,
    SpatioTemporal,
    ContextualAtmosphere,
    Psychological,
}

impl Stratum {
    pub const ALL: [Stratum; 4] = [
        Stratum::Participants,
        Stratum::SpatioTemporal,
        Stratum::ContextualAtmosphere,
        Stratum::Psychological,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::Participants => "participants",
            Stratum::SpatioTemporal => "spatio_temporal",
            Stratum::ContextualAtmosphere => "contextual_atmosphere",
            Stratum::Psychological => "psychological",
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeKind {
    pub id: String,
    pub stratum: Stratum,
    pub vocabulary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub id: String,
    pub latent: bool,
    /// Permitted (subject kind, object kind) pairs.
    pub arity: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleTarget {
    Predicate,
    ObjectKind,
}

/// One id, or a list of alternatives of which any one satisfies the rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RuleIds {
    One(String),
    AnyOf(Vec<String>),
}

impl RuleIds {
    pub fn ids(&self) -> &[String] {
        match self {
            RuleIds::One(id) => std::slice::from_ref(id),
            RuleIds::AnyOf(ids) => ids,
        }
    }
}

/// A minimal-completeness requirement: some triplet must use one of the
/// listed predicates (or have one of the listed object kinds).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletenessRule {
    #[serde(rename = "type")]
    pub target: RuleTarget,
    pub id: RuleIds,
}

impl CompletenessRule {
    /// Stable label used as the subject of `completeness_unmet` violations.
    pub fn label(&self) -> String {
        let target = match self.target {
            RuleTarget::Predicate => "predicate",
            RuleTarget::ObjectKind => "object_kind",
        };
        format!("{}:{}", target, self.id.ids().join("|"))
    }

    pub fn is_satisfied_by(&self, triplet: &Triplet) -> bool {
        let field = match self.target {
            RuleTarget::Predicate => &triplet.predicate,
            RuleTarget::ObjectKind => &triplet.object.kind,
        };
        self.id.ids().iter().any(|id| canonical(id) == *field)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SchemaDoc {
    kinds: Vec<NodeKind>,
    predicates: Vec<Predicate>,
    min_triplets: usize,
    max_triplets: usize,
    #[serde(default)]
    completeness_rules: Vec<CompletenessRule>,
}

#[derive(Debug, Clone, Default)]
struct SchemaIndex {
    kind_pos: HashMap<String, usize>,
    kind_ids: Vec<String>,
    vocab: Vec<Vec<String>>,
    vocab_set: Vec<HashSet<String>>,
    pred_pos: HashMap<String, usize>,
    pred_ids: Vec<String>,
    arity: Vec<Vec<(String, String)>>,
    arity_set: Vec<HashSet<(String, String)>>,
}

/// A loaded, referentially closed schema. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SchemaDef {
    doc: SchemaDoc,
    index: SchemaIndex,
}

impl PartialEq for SchemaDef {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

impl Eq for SchemaDef {}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema parse error: {0}")]
    Parse(String),
    #[error("{path}: kind `{kind}` is not declared")]
    DanglingKind { path: String, kind: String },
    #[error("{path}: `{id}` is not a declared {target}")]
    DanglingRule {
        path: String,
        id: String,
        target: &'static str,
    },
    #[error("{path}: duplicate id `{id}`")]
    DuplicateId { path: String, id: String },
    #[error("{path}: vocabulary is empty")]
    EmptyVocabulary { path: String },
    #[error("{path}: duplicate name `{name}`")]
    DuplicateName { path: String, name: String },
    #[error("{path}: invalid identifier or name `{name}` (empty, or contains ':', '|' or a line break)")]
    InvalidName { path: String, name: String },
    #[error("{path}: arity is empty")]
    EmptyArity { path: String },
    #[error("triplet bounds must satisfy 0 < min <= max, got min={min} max={max}")]
    Bounds { min: usize, max: usize },
}

fn check_token(path: String, raw: &str) -> Result<String, SchemaError> {
    let c = canonical(raw);
    if c.is_empty() || c.contains([':', '|', '\n', '\r']) {
        return Err(SchemaError::InvalidName {
            path,
            name: raw.to_string(),
        });
    }
    Ok(c)
}

/// Parse and validate a schema document.
pub fn load_schema(source: &str) -> Result<SchemaDef, SchemaError> {
    let doc: SchemaDoc = serde_json::from_str(source).map_err(|e| SchemaError::Parse(e.to_string()))?;
    SchemaDef::from_doc(doc)
}

impl SchemaDef {
    fn from_doc(doc: SchemaDoc) -> Result<Self, SchemaError> {
        if doc.min_triplets == 0 || doc.min_triplets > doc.max_triplets {
            return Err(SchemaError::Bounds {
                min: doc.min_triplets,
                max: doc.max_triplets,
            });
        }
        let mut index = SchemaIndex::default();

        for (i, kind) in doc.kinds.iter().enumerate() {
            let id = check_token(format!("kinds[{i}].id"), &kind.id)?;
            if index.kind_pos.insert(id.clone(), i).is_some() {
                return Err(SchemaError::DuplicateId {
                    path: format!("kinds[{i}].id"),
                    id: kind.id.clone(),
                });
            }
            if kind.vocabulary.is_empty() {
                return Err(SchemaError::EmptyVocabulary {
                    path: format!("kinds[{i}].vocabulary"),
                });
            }
            let mut names = Vec::with_capacity(kind.vocabulary.len());
            let mut seen = HashSet::new();
            for (j, name) in kind.vocabulary.iter().enumerate() {
                let path = format!("kinds[{i}].vocabulary[{j}]");
                let c = check_token(path.clone(), name)?;
                if !seen.insert(c.clone()) {
                    return Err(SchemaError::DuplicateName {
                        path,
                        name: name.clone(),
                    });
                }
                names.push(c);
            }
            index.kind_ids.push(id);
            index.vocab.push(names);
            index.vocab_set.push(seen);
        }

        for (i, pred) in doc.predicates.iter().enumerate() {
            let id = check_token(format!("predicates[{i}].id"), &pred.id)?;
            if index.pred_pos.insert(id.clone(), i).is_some() {
                return Err(SchemaError::DuplicateId {
                    path: format!("predicates[{i}].id"),
                    id: pred.id.clone(),
                });
            }
            if pred.arity.is_empty() {
                return Err(SchemaError::EmptyArity {
                    path: format!("predicates[{i}].arity"),
                });
            }
            let mut pairs = Vec::with_capacity(pred.arity.len());
            let mut set = HashSet::new();
            for (j, (s, o)) in pred.arity.iter().enumerate() {
                let resolve = |slot: usize, raw: &str| {
                    let c = canonical(raw);
                    if index.kind_pos.contains_key(&c) {
                        Ok(c)
                    } else {
                        Err(SchemaError::DanglingKind {
                            path: format!("predicates[{i}].arity[{j}][{slot}]"),
                            kind: raw.to_string(),
                        })
                    }
                };
                let pair = (resolve(0, s)?, resolve(1, o)?);
                if set.insert(pair.clone()) {
                    pairs.push(pair);
                }
            }
            index.pred_ids.push(id);
            index.arity.push(pairs);
            index.arity_set.push(set);
        }

        for (i, rule) in doc.completeness_rules.iter().enumerate() {
            for (j, id) in rule.id.ids().iter().enumerate() {
                let c = canonical(id);
                let (known, target) = match rule.target {
                    RuleTarget::Predicate => (index.pred_pos.contains_key(&c), "predicate"),
                    RuleTarget::ObjectKind => (index.kind_pos.contains_key(&c), "node kind"),
                };
                if !known {
                    return Err(SchemaError::DanglingRule {
                        path: format!("completeness_rules[{i}].id[{j}]"),
                        id: id.clone(),
                        target,
                    });
                }
            }
        }

        Ok(SchemaDef { doc, index })
    }

    /// The shipped default schema (11 kinds, 14 predicates).
    pub fn default_schema() -> SchemaDef {
        load_schema(DEFAULT_SCHEMA).expect("shipped default schema is valid")
    }

    /// Canonical JSON serialization (the schema file format).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.doc).expect("schema serializes");
        s.push('\n');
        s
    }

    /// SHA-256 over the compact canonical serialization.
    pub fn fingerprint(&self) -> String {
        let compact = serde_json::to_vec(&self.doc).expect("schema serializes");
        crate::seed::sha256_hex(&compact)
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.doc.kinds
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.doc.predicates
    }

    pub fn min_triplets(&self) -> usize {
        self.doc.min_triplets
    }

    pub fn max_triplets(&self) -> usize {
        self.doc.max_triplets
    }

    pub fn completeness_rules(&self) -> &[CompletenessRule] {
        &self.doc.completeness_rules
    }

    /// Canonical kind ids in declaration order.
    pub fn kind_ids(&self) -> &[String] {
        &self.index.kind_ids
    }

    /// Canonical predicate ids in declaration order.
    pub fn predicate_ids(&self) -> &[String] {
        &self.index.pred_ids
    }

    pub fn kind(&self, id: &str) -> Option<&NodeKind> {
        self.index
            .kind_pos
            .get(&canonical(id))
            .map(|&i| &self.doc.kinds[i])
    }

    pub fn has_kind(&self, id: &str) -> bool {
        self.index.kind_pos.contains_key(&canonical(id))
    }

    pub fn stratum_of(&self, kind: &str) -> Option<Stratum> {
        self.kind(kind).map(|k| k.stratum)
    }

    /// Canonical vocabulary of a kind, in declaration order.
    pub fn vocabulary(&self, kind: &str) -> Option<&[String]> {
        self.index
            .kind_pos
            .get(&canonical(kind))
            .map(|&i| self.index.vocab[i].as_slice())
    }

    pub fn in_vocabulary(&self, kind: &str, name: &str) -> bool {
        self.index
            .kind_pos
            .get(&canonical(kind))
            .is_some_and(|&i| self.index.vocab_set[i].contains(&canonical(name)))
    }

    pub fn predicate(&self, id: &str) -> Option<&Predicate> {
        self.index
            .pred_pos
            .get(&canonical(id))
            .map(|&i| &self.doc.predicates[i])
    }

    pub fn has_predicate(&self, id: &str) -> bool {
        self.index.pred_pos.contains_key(&canonical(id))
    }

    /// Canonical arity pairs of a predicate.
    pub fn arity(&self, predicate: &str) -> Option<&[(String, String)]> {
        self.index
            .pred_pos
            .get(&canonical(predicate))
            .map(|&i| self.index.arity[i].as_slice())
    }

    pub fn arity_allows(&self, predicate: &str, subject_kind: &str, object_kind: &str) -> bool {
        self.index.pred_pos.get(&canonical(predicate)).is_some_and(|&i| {
            self.index.arity_set[i].contains(&(canonical(subject_kind), canonical(object_kind)))
        })
    }

    pub fn is_latent_predicate(&self, predicate: &str) -> bool {
        self.predicate(predicate).is_some_and(|p| p.latent)
    }

    /// Canonical ids of the kinds in a stratum.
    pub fn kinds_in(&self, stratum: Stratum) -> Vec<&str> {
        self.doc
            .kinds
            .iter()
            .zip(&self.index.kind_ids)
            .filter(|(k, _)| k.stratum == stratum)
            .map(|(_, id)| id.as_str())
            .collect()
    }

    /// Number of kinds per stratum (strata with no kinds are omitted).
    pub fn stratum_counts(&self) -> BTreeMap<Stratum, usize> {
        let mut counts = BTreeMap::new();
        for kind in &self.doc.kinds {
            *counts.entry(kind.stratum).or_insert(0) += 1;
        }
        counts
    }

    /// A triplet is latent iff its predicate is latent or its object kind
    /// sits in the psychological stratum.
    pub fn is_latent(&self, triplet: &Triplet) -> bool {
        self.is_latent_predicate(&triplet.predicate)
            || self.stratum_of(&triplet.object.kind) == Some(Stratum::Psychological)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownPredicate,
    UnknownNodeKind,
    NameNotInVocabulary,
    ArityViolation,
    SizeBelowMin,
    SizeAboveMax,
    CompletenessUnmet,
    DuplicateTriplet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Offending triplet (canonical text) or rule label.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = serde_json::to_value(self.kind).expect("violation kind serializes");
        write!(
            f,
            "{} [{}]: {}",
            kind.as_str().unwrap_or_default(),
            self.subject,
            self.message
        )
    }
}

/// Check one triplet against the schema. Violations are returned, never raised.
pub fn check_triplet(schema: &SchemaDef, t: &Triplet) -> Vec<Violation> {
    let subject = t.canonical_text();
    let mut out = Vec::new();
    let mut push = |kind, message: String| {
        out.push(Violation {
            kind,
            subject: subject.clone(),
            message,
        })
    };

    let predicate_known = schema.has_predicate(&t.predicate);
    if !predicate_known {
        push(
            ViolationKind::UnknownPredicate,
            format!("predicate `{}` is not declared", t.predicate),
        );
    }
    for node in [&t.subject, &t.object] {
        if !schema.has_kind(&node.kind) {
            push(
                ViolationKind::UnknownNodeKind,
                format!("node kind `{}` is not declared", node.kind),
            );
        } else if !schema.in_vocabulary(&node.kind, &node.name) {
            push(
                ViolationKind::NameNotInVocabulary,
                format!("`{}` is not in the `{}` vocabulary", node.name, node.kind),
            );
        }
    }
    if predicate_known && !schema.arity_allows(&t.predicate, &t.subject.kind, &t.object.kind) {
        push(
            ViolationKind::ArityViolation,
            format!(
                "({}, {}) is not a permitted pair for `{}`",
                t.subject.kind, t.object.kind, t.predicate
            ),
        );
    }
    out
}

/// Per-triplet checks plus size bounds, completeness rules and duplicates.
pub fn validate_graph(schema: &SchemaDef, g: &SituationGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for t in &g.triplets {
        out.extend(check_triplet(schema, t));
        if !seen.insert(t) {
            out.push(Violation {
                kind: ViolationKind::DuplicateTriplet,
                subject: t.canonical_text(),
                message: "triplet appears more than once".into(),
            });
        }
    }

    let n = seen.len();
    let graph_label = format!("graph:{}", g.instance_id);
    if n < schema.min_triplets() {
        out.push(Violation {
            kind: ViolationKind::SizeBelowMin,
            subject: graph_label.clone(),
            message: format!("{n} triplets, minimum is {}", schema.min_triplets()),
        });
    }
    if n > schema.max_triplets() {
        out.push(Violation {
            kind: ViolationKind::SizeAboveMax,
            subject: graph_label,
            message: format!("{n} triplets, maximum is {}", schema.max_triplets()),
        });
    }
    for rule in schema.completeness_rules() {
        if !g.triplets.iter().any(|t| rule.is_satisfied_by(t)) {
            out.push(Violation {
                kind: ViolationKind::CompletenessUnmet,
                subject: rule.label(),
                message: "no triplet satisfies this completeness rule".into(),
            });
        }
    }
    out
}

/// Split triplets into (latent, surface). The split is exact: disjoint and covering.
pub fn partition_latent_surface<'a, I>(
    schema: &SchemaDef,
    triplets: I,
) -> (BTreeSet<Triplet>, BTreeSet<Triplet>)
where
    I: IntoIterator<Item = &'a Triplet>,
{
    triplets.into_iter().cloned().partition(|t| schema.is_latent(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Triplet;

    fn t(s: &str, p: &str, o: &str) -> Triplet {
        Triplet::parse_pair(s, p, o).unwrap()
    }

    const MINIMAL: &str = r#"{
        "kinds": [
            {"id": "Person", "stratum": "participants", "vocabulary": ["Elise"]},
            {"id": "Emotion", "stratum": "psychological", "vocabulary": ["Stressed"]}
        ],
        "predicates": [{"id": "feels", "latent": true, "arity": [["Person", "Emotion"]]}],
        "min_triplets": 1,
        "max_triplets": 4
    }"#;

    #[test]
    fn default_schema_counts() {
        let s = SchemaDef::default_schema();
        assert_eq!(s.kinds().len(), 11);
        assert_eq!(s.predicates().len(), 14);
        assert_eq!(s.predicates().iter().filter(|p| p.latent).count(), 4);
        assert_eq!(s.stratum_counts().len(), 4);
        let psych = s.kinds_in(Stratum::Psychological);
        assert_eq!(psych, vec!["emotion", "valence"]);
        assert_eq!(s.min_triplets(), 6);
        assert_eq!(s.max_triplets(), 18);
    }

    #[test]
    fn default_vocabulary_sizes() {
        let s = SchemaDef::default_schema();
        let total = |psych: bool| -> usize {
            s.kinds()
                .iter()
                .filter(|k| (k.stratum == Stratum::Psychological) == psych)
                .map(|k| k.vocabulary.len())
                .sum()
        };
        assert_eq!(total(true), 8);
        assert_eq!(total(false), 106);
        assert_eq!(s.vocabulary("Emotion").unwrap().len(), 6);
    }

    #[test]
    fn minimal_schema_loads() {
        let s = load_schema(MINIMAL).unwrap();
        assert_eq!(s.kinds().len(), 2);
        assert!(s.arity_allows("FEELS", "person", " Emotion "));
    }

    #[test]
    fn dangling_kind_is_reported_with_path() {
        let src = MINIMAL.replace(r#"["Person", "Emotion"]"#, r#"["Person", "Ghost"]"#);
        match load_schema(&src) {
            Err(SchemaError::DanglingKind { path, kind }) => {
                assert_eq!(path, "predicates[0].arity[0][1]");
                assert_eq!(kind, "Ghost");
            }
            other => panic!("expected dangling kind, got {other:?}"),
        }
    }

    #[test]
    fn load_errors() {
        assert!(matches!(load_schema("{"), Err(SchemaError::Parse(_))));
        let dup = MINIMAL.replace(r#""id": "Emotion""#, r#""id": "person""#);
        assert!(matches!(load_schema(&dup), Err(SchemaError::DuplicateId { .. })));
        let empty = MINIMAL.replace(r#"["Stressed"]"#, "[]");
        match load_schema(&empty) {
            Err(SchemaError::EmptyVocabulary { path }) => assert_eq!(path, "kinds[1].vocabulary"),
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace(r#""Stressed""#, r#""Str|essed""#);
        assert!(matches!(load_schema(&bad), Err(SchemaError::InvalidName { .. })));
        let bounds = MINIMAL.replace(r#""min_triplets": 1"#, r#""min_triplets": 0"#);
        assert!(matches!(load_schema(&bounds), Err(SchemaError::Bounds { .. })));
        let rule = MINIMAL.replace(
            r#""max_triplets": 4"#,
            r#""max_triplets": 4, "completeness_rules": [{"type": "predicate", "id": "evokes"}]"#,
        );
        assert!(matches!(
            load_schema(&rule),
            Err(SchemaError::DanglingRule { .. })
        ));
    }

    #[test]
    fn serialization_round_trips() {
        let s = SchemaDef::default_schema();
        let back = load_schema(&s.to_json()).unwrap();
        assert_eq!(s, back);
        assert_eq!(s.fingerprint(), back.fingerprint());
    }

    #[test]
    fn check_triplet_examples() {
        let s = SchemaDef::default_schema();
        assert!(check_triplet(&s, &t("Person:Elise", "feels", "Emotion:Stressed")).is_empty());

        let rev = check_triplet(&s, &t("Emotion:Stressed", "feels", "Person:Elise"));
        assert_eq!(
            rev.iter().map(|v| v.kind).collect::<Vec<_>>(),
            vec![ViolationKind::ArityViolation]
        );

        let unk = check_triplet(&s, &t("Person:Elise", "admires", "Person:Bob"));
        assert_eq!(
            unk.iter().map(|v| v.kind).collect::<Vec<_>>(),
            vec![ViolationKind::UnknownPredicate]
        );

        let vocab = check_triplet(&s, &t("Person:Zed", "feels", "Emotion:Stressed"));
        assert_eq!(vocab[0].kind, ViolationKind::NameNotInVocabulary);

        let kind = check_triplet(&s, &t("Robot:Elise", "feels", "Emotion:Stressed"));
        let kinds: Vec<_> = kind.iter().map(|v| v.kind).collect();
        assert_eq!(
            kinds,
            vec![ViolationKind::UnknownNodeKind, ViolationKind::ArityViolation]
        );
    }

    fn graph(triplets: Vec<Triplet>) -> SituationGraph {
        SituationGraph {
            instance_id: "g".into(),
            time_index: 0,
            triplets,
        }
    }

    fn complete_core() -> Vec<Triplet> {
        vec![
            t("Event:Interview", "has_participant", "Person:Elise"),
            t("Event:Interview", "occurs_at", "LocationType:Office"),
            t("Person:Elise", "feels", "Emotion:Stressed"),
            t("Emotion:Stressed", "has_valence", "Valence:Negative"),
            t("Event:Interview", "occurs_during", "TimeOfDay:Morning"),
            t("Event:Interview", "has_context", "SocialContext:Professional"),
        ]
    }

    #[test]
    fn validate_graph_structural_checks() {
        let s = SchemaDef::default_schema();
        assert!(validate_graph(&s, &graph(complete_core())).is_empty());

        let mut big = complete_core();
        let extra: Vec<String> = ["Person", "Organization"]
            .iter()
            .flat_map(|k| s.vocabulary(k).unwrap().iter().map(move |n| format!("{k}:{n}")))
            .filter(|n| n != "Person:elise")
            .collect();
        let need = s.max_triplets() + 1 - big.len();
        for node in extra.iter().take(need) {
            big.push(t("Event:Interview", "has_participant", node));
        }
        assert_eq!(big.len(), s.max_triplets() + 1);
        let v = validate_graph(&s, &graph(big));
        assert!(v.iter().any(|v| v.kind == ViolationKind::SizeAboveMax));

        let surface_only: Vec<_> = complete_core().into_iter().filter(|x| !s.is_latent(x)).collect();
        let v = validate_graph(&s, &graph(surface_only));
        assert!(v
            .iter()
            .any(|v| v.kind == ViolationKind::CompletenessUnmet && v.subject == "predicate:feels"));
        assert!(v.iter().any(|v| v.kind == ViolationKind::SizeBelowMin));

        let mut dup = complete_core();
        dup.push(t("person:ELISE ", "Feels", "emotion:stressed"));
        let v = validate_graph(&s, &graph(dup));
        assert_eq!(
            v.iter().map(|v| v.kind).collect::<Vec<_>>(),
            vec![ViolationKind::DuplicateTriplet]
        );
    }

    #[test]
    fn either_anchor_satisfies_disjunctive_rule() {
        let s = SchemaDef::default_schema();
        let mut only_during: Vec<_> = complete_core()
            .into_iter()
            .filter(|x| x.predicate != "occurs_at")
            .collect();
        only_during.push(t("Event:Interview", "has_ambience", "Ambience:Tense"));
        assert!(validate_graph(&s, &graph(only_during)).is_empty());
    }

    #[test]
    fn partition_examples() {
        let s = SchemaDef::default_schema();
        let feels = t("Person:Elise", "feels", "Emotion:Stressed");
        let (lat, surf) = partition_latent_surface(&s, [&feels]);
        assert_eq!(lat.len(), 1);
        assert!(surf.is_empty());

        let at = t("Event:Interview", "occurs_at", "LocationType:Office");
        let (lat, surf) = partition_latent_surface(&s, [&at]);
        assert!(lat.is_empty());
        assert_eq!(surf.len(), 1);

        let (lat, surf) = partition_latent_surface(&s, std::iter::empty());
        assert!(lat.is_empty() && surf.is_empty());
    }
}
