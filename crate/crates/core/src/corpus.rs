//! Graphs, artifacts, instances and the JSON-lines corpus file.
//!
//! Corpus file layout: line 1 is a header record
//! `{persona, schema_fingerprint, domain_list}`; each following line is one
//! instance whose gold triplets are stored as
//! `[subject_kind, subject_name, predicate, object_kind, object_name]`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ontology::SchemaDef;

/// Canonical form of identifiers and names: trimmed and lowercased.
pub fn canonical(s: &str) -> String {
    s.trim().to_lowercase()
}

/// The four life domains used by the default generator configuration.
pub const DEFAULT_DOMAINS: [&str; 4] = [
    "professional",
    "personal_lifestyle",
    "health_physical",
    "social_relational",
];

pub fn default_domains() -> Vec<String> {
    DEFAULT_DOMAINS.iter().map(|d| d.to_string()).collect()
}

/// A typed node. Both fields are stored in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub kind: String,
    pub name: String,
}

impl Node {
    pub fn new(kind: &str, name: &str) -> Self {
        Node {
            kind: canonical(kind),
            name: canonical(name),
        }
    }

    /// Parse `kind:name`. Both halves must be non-empty.
    pub fn parse(s: &str) -> Option<Self> {
        let (kind, name) = s.split_once(':')?;
        let node = Node::new(kind, name);
        (!node.kind.is_empty() && !node.name.is_empty()).then_some(node)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.name)
    }
}

/// A semantic triplet `(subject, predicate, object)` in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub subject: Node,
    pub predicate: String,
    pub object: Node,
}

impl Triplet {
    pub fn new(subject: Node, predicate: &str, object: Node) -> Self {
        Triplet {
            subject,
            predicate: canonical(predicate),
            object,
        }
    }

    pub fn from_parts(sk: &str, sn: &str, p: &str, ok: &str, on: &str) -> Self {
        Triplet::new(Node::new(sk, sn), p, Node::new(ok, on))
    }

    /// Build from `kind:name`, predicate, `kind:name`.
    pub fn parse_pair(subject: &str, predicate: &str, object: &str) -> Option<Self> {
        let p = canonical(predicate);
        if p.is_empty() {
            return None;
        }
        Some(Triplet::new(Node::parse(subject)?, &p, Node::parse(object)?))
    }

    /// `kind:name|predicate|kind:name`, lowercase.
    pub fn canonical_text(&self) -> String {
        canonical_triplet_text(self)
    }

    /// One line of the prediction output grammar.
    pub fn to_grammar_line(&self) -> String {
        format!("{} | {} | {}", self.subject, self.predicate, self.object)
    }

    fn to_record(&self) -> [&str; 5] {
        [
            &self.subject.kind,
            &self.subject.name,
            &self.predicate,
            &self.object.kind,
            &self.object.name,
        ]
    }
}

/// Deterministic, injective rendering used for strict matching and embedding.
pub fn canonical_triplet_text(t: &Triplet) -> String {
    format!("{}|{}|{}", t.subject, t.predicate, t.object)
}

impl Serialize for Triplet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Triplet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [sk, sn, p, ok, on] = <[String; 5]>::deserialize(d)?;
        let t = Triplet::from_parts(&sk, &sn, &p, &ok, &on);
        if t.to_record().iter().any(|f| f.is_empty()) {
            return Err(D::Error::custom("triplet fields must be non-empty"));
        }
        Ok(t)
    }
}

/// A situation graph as a list of triplets. Validation reports duplicates;
/// use [`SituationGraph::triplet_set`] for set semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SituationGraph {
    pub instance_id: String,
    pub time_index: u64,
    pub triplets: Vec<Triplet>,
}

impl SituationGraph {
    pub fn triplet_set(&self) -> BTreeSet<Triplet> {
        self.triplets.iter().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
    Audio,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Image => "image",
            Modality::Audio => "audio",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One observable artifact. Image and audio artifacts carry their
/// descriptor stub as `content`; `meta["file_ref"]` may point at media.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub artifact_id: String,
    pub modality: Modality,
    pub content: String,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Artifact {
    pub fn genre(&self) -> &str {
        self.meta.get("genre").map(String::as_str).unwrap_or("unknown")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub instance_id: String,
    pub time_index: u64,
    pub domain: String,
    pub artifacts: Vec<Artifact>,
    pub gold: SituationGraph,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub persona: BTreeMap<String, String>,
    pub domains: Vec<String>,
    /// Fingerprint of the schema the gold graphs were generated under.
    pub schema_ref: String,
    /// Effective configuration that produced the corpus; carried in the header.
    pub provenance: BTreeMap<String, serde_json::Value>,
    pub instances: Vec<Instance>,
}

impl Corpus {
    pub fn artifact_count(&self) -> usize {
        self.instances.iter().map(|i| i.artifacts.len()).sum()
    }

    pub fn get(&self, instance_id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.instance_id == instance_id)
    }

    /// instance_id -> position in `instances`.
    pub fn positions(&self) -> BTreeMap<&str, usize> {
        self.instances
            .iter()
            .enumerate()
            .map(|(i, inst)| (inst.instance_id.as_str(), i))
            .collect()
    }

    /// Check ordering, domain membership and artifact invariants.
    pub fn check_invariants(&self) -> Result<(), CorpusError> {
        let mut last: Option<u64> = None;
        let mut ids = BTreeSet::new();
        for (i, inst) in self.instances.iter().enumerate() {
            let line = i + 2;
            if let Some(prev) = last {
                if inst.time_index <= prev {
                    return Err(CorpusError::Order {
                        line,
                        previous: prev,
                        found: inst.time_index,
                    });
                }
            }
            last = Some(inst.time_index);
            if !ids.insert(inst.instance_id.as_str()) {
                return Err(malformed(line, "instance_id", "duplicate instance id"));
            }
            if !self.domains.contains(&inst.domain) {
                return Err(malformed(
                    line,
                    "domain",
                    &format!("unknown domain `{}`", inst.domain),
                ));
            }
            if inst.gold.instance_id != inst.instance_id || inst.gold.time_index != inst.time_index {
                return Err(malformed(line, "gold", "gold graph does not match its instance"));
            }
            for a in &inst.artifacts {
                if a.content.trim().is_empty() {
                    return Err(malformed(
                        line,
                        "artifacts.content",
                        &format!("artifact `{}` has empty content", a.artifact_id),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record, field `{field}`: {message}")]
    Malformed {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: time_index {found} does not strictly follow {previous}")]
    Order { line: usize, previous: u64, found: u64 },
    #[error("schema fingerprint mismatch: corpus has {found}, schema is {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("corpus file is empty (missing header)")]
    MissingHeader,
}

fn malformed(line: usize, field: &str, message: &str) -> CorpusError {
    CorpusError::Malformed {
        line,
        field: field.to_string(),
        message: message.to_string(),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    persona: BTreeMap<String, String>,
    schema_fingerprint: String,
    domain_list: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    provenance: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRecord {
    instance_id: String,
    time_index: u64,
    domain: String,
    artifacts: Vec<Artifact>,
    gold: Vec<Triplet>,
}

/// Write the corpus as JSON lines.
pub fn write_corpus<W: Write>(c: &Corpus, mut sink: W) -> Result<(), CorpusError> {
    c.check_invariants()?;
    let header = HeaderRecord {
        persona: c.persona.clone(),
        schema_fingerprint: c.schema_ref.clone(),
        domain_list: c.domains.clone(),
        provenance: c.provenance.clone(),
    };
    serde_json::to_writer(&mut sink, &header).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    for inst in &c.instances {
        let rec = InstanceRecord {
            instance_id: inst.instance_id.clone(),
            time_index: inst.time_index,
            domain: inst.domain.clone(),
            artifacts: inst.artifacts.clone(),
            gold: inst.gold.triplets.clone(),
        };
        serde_json::to_writer(&mut sink, &rec).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

/// Serialize to an in-memory string.
pub fn corpus_to_string(c: &Corpus) -> Result<String, CorpusError> {
    let mut buf = Vec::new();
    write_corpus(c, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Field name a serde error most likely refers to, for diagnostics.
fn serde_field(err: &serde_json::Error) -> String {
    let msg = err.to_string();
    for marker in ["field `", "variant `"] {
        if let Some(start) = msg.find(marker) {
            let rest = &msg[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    "record".to_string()
}

/// Read a corpus. When `schema` is given its fingerprint must match the header.
pub fn read_corpus<R: BufRead>(source: R, schema: Option<&SchemaDef>) -> Result<Corpus, CorpusError> {
    let mut lines = source.lines().enumerate();
    let header: HeaderRecord = loop {
        match lines.next() {
            None => return Err(CorpusError::MissingHeader),
            Some((_, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|e| malformed(1, &serde_field(&e), &e.to_string()))?;
            }
        }
    };
    if let Some(schema) = schema {
        let expected = schema.fingerprint();
        if expected != header.schema_fingerprint {
            return Err(CorpusError::FingerprintMismatch {
                expected,
                found: header.schema_fingerprint,
            });
        }
    }

    let mut instances = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let rec: InstanceRecord =
            serde_json::from_str(&line).map_err(|e| malformed(lineno, &serde_field(&e), &e.to_string()))?;
        if !header.domain_list.contains(&rec.domain) {
            return Err(malformed(
                lineno,
                "domain",
                &format!("unknown domain `{}`", rec.domain),
            ));
        }
        instances.push(Instance {
            gold: SituationGraph {
                instance_id: rec.instance_id.clone(),
                time_index: rec.time_index,
                triplets: rec.gold,
            },
            instance_id: rec.instance_id,
            time_index: rec.time_index,
            domain: rec.domain,
            artifacts: rec.artifacts,
        });
    }

    let corpus = Corpus {
        persona: header.persona,
        domains: header.domain_list,
        schema_ref: header.schema_fingerprint,
        provenance: header.provenance,
        instances,
    };
    corpus.check_invariants()?;
    Ok(corpus)
}

pub fn corpus_from_str(s: &str, schema: Option<&SchemaDef>) -> Result<Corpus, CorpusError> {
    read_corpus(s.as_bytes(), schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_corpus(n: usize) -> Corpus {
        let instances = (0..n)
            .map(|i| {
                let id = format!("inst-{i:04}");
                Instance {
                    instance_id: id.clone(),
                    time_index: i as u64,
                    domain: DEFAULT_DOMAINS[i % 4].to_string(),
                    artifacts: (0..3)
                        .map(|j| Artifact {
                            artifact_id: format!("{id}-a{j}"),
                            modality: Modality::Text,
                            content: format!("artifact {j} of {id}"),
                            meta: BTreeMap::from([("genre".into(), "email".into())]),
                        })
                        .collect(),
                    gold: SituationGraph {
                        instance_id: id,
                        time_index: i as u64,
                        triplets: vec![Triplet::from_parts(
                            "Person", "Elise", "feels", "Emotion", "Stressed",
                        )],
                    },
                }
            })
            .collect();
        Corpus {
            persona: BTreeMap::from([("name".into(), "Elise Navarro".into())]),
            domains: default_domains(),
            schema_ref: "abc".into(),
            provenance: BTreeMap::new(),
            instances,
        }
    }

    #[test]
    fn canonical_text_examples() {
        let a = Triplet::from_parts("Person", "Elise", "feels", "Emotion", "Stressed");
        assert_eq!(a.canonical_text(), "person:elise|feels|emotion:stressed");
        let b = Triplet::from_parts(" PERSON", "eLiSe ", "Feels", "emotion", "STRESSED");
        assert_eq!(a.canonical_text(), b.canonical_text());
        assert_eq!(a, b);
        let c = Triplet::from_parts("Person", "Elise", "evokes", "Emotion", "Stressed");
        assert_ne!(a.canonical_text(), c.canonical_text());
    }

    #[test]
    fn empty_corpus_round_trips() {
        let c = sample_corpus(0);
        let back = corpus_from_str(&corpus_to_string(&c).unwrap(), None).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn pilot_shaped_corpus_round_trips() {
        let c = sample_corpus(75);
        let back = corpus_from_str(&corpus_to_string(&c).unwrap(), None).unwrap();
        assert_eq!(back.artifact_count(), 225);
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_domain_names_the_field() {
        let text = corpus_to_string(&sample_corpus(2)).unwrap().replacen(
            "\"domain\":\"personal_lifestyle\"",
            "\"domain\":\"astrology\"",
            1,
        );
        match corpus_from_str(&text, None) {
            Err(CorpusError::Malformed { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "domain");
            }
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn bad_modality_names_the_field() {
        let text = corpus_to_string(&sample_corpus(1))
            .unwrap()
            .replace("\"modality\":\"text\"", "\"modality\":\"smell\"");
        assert!(matches!(
            corpus_from_str(&text, None),
            Err(CorpusError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn fingerprint_checked_when_schema_given() {
        let text = corpus_to_string(&sample_corpus(1)).unwrap();
        let schema = SchemaDef::default_schema();
        assert!(matches!(
            corpus_from_str(&text, Some(&schema)),
            Err(CorpusError::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn time_order_enforced() {
        let mut c = sample_corpus(3);
        c.instances[2].time_index = 1;
        c.instances[2].gold.time_index = 1;
        assert!(matches!(
            corpus_to_string(&c),
            Err(CorpusError::Order { line: 4, .. })
        ));
    }

    #[test]
    fn node_parse_rejects_missing_parts() {
        assert!(Node::parse("elise").is_none());
        assert!(Node::parse(":elise").is_none());
        assert!(Node::parse("person: ").is_none());
        assert_eq!(
            Node::parse(" Person : Elise ").unwrap(),
            Node::new("person", "elise")
        );
    }
}
