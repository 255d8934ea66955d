//! Parsing predictor output in the line grammar
//! `subject_kind:subject_name | predicate | object_kind:object_name`.

use std::collections::BTreeSet;

use crate::corpus::{canonical, Node, Triplet};
use crate::ontology::SchemaDef;

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, '_' | '-' | ' '))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Map spelling variants (`LocationType`, `location_type`, `location type`)
/// onto a declared id; unknown tokens are kept in canonical form.
fn normalize_id(raw: &str, declared: &[String]) -> String {
    let key = squash(raw);
    declared
        .iter()
        .find(|id| squash(id) == key)
        .cloned()
        .unwrap_or_else(|| canonical(raw).replace(' ', "_"))
}

fn strip_marker(line: &str) -> &str {
    let line = line.trim();
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return rest.trim_start();
        }
    }
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return rest.trim_start();
        }
    }
    line
}

fn parse_node(s: &str, schema: &SchemaDef) -> Option<Node> {
    let (kind, name) = s.split_once(':')?;
    let (kind, name) = (kind.trim(), name.trim());
    if kind.is_empty() || name.is_empty() {
        return None;
    }
    Some(Node::new(&normalize_id(kind, schema.kind_ids()), name))
}

fn parse_line(line: &str, schema: &SchemaDef) -> Option<Triplet> {
    let parts: Vec<&str> = line.split('|').collect();
    let [s, p, o] = parts.as_slice() else {
        return None;
    };
    let p = p.trim();
    if p.is_empty() || p.contains(':') {
        return None;
    }
    Some(Triplet::new(
        parse_node(s, schema)?,
        &normalize_id(p, schema.predicate_ids()),
        parse_node(o, schema)?,
    ))
}

/// Extract the set of triplets in `raw` and count malformed lines. Blank
/// lines and code fences are skipped. The result is not filtered against
/// the schema.
pub fn parse_prediction(raw: &str, schema: &SchemaDef) -> (BTreeSet<Triplet>, usize) {
    let mut out = BTreeSet::new();
    let mut failures = 0;
    for line in raw.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("```") {
            continue;
        }
        match parse_line(strip_marker(trimmed), schema) {
            Some(t) => {
                out.insert(t);
            }
            None => failures += 1,
        }
    }
    (out, failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_lines() {
        let schema = SchemaDef::default_schema();
        let raw = "\
event:interview | occurs_at | locationtype:office
event:interview | has_participant | person:elise
event:interview | occurs_during | timeofday:morning
person:elise | feels | emotion:stressed
emotion:stressed | has_valence | valence:negative
person:elise | has_role | role:senior marketing analyst
event:interview | has_ambience | ambience:tense
event:interview | has_context | socialcontext:professional";
        let (set, failures) = parse_prediction(raw, &schema);
        assert_eq!((set.len(), failures), (8, 0));
    }

    #[test]
    fn malformed_lines_are_counted() {
        let schema = SchemaDef::default_schema();
        let (set, failures) = parse_prediction("elise feels stressed\nperson:elise | feels", &schema);
        assert!(set.is_empty());
        assert_eq!(failures, 2);
    }

    #[test]
    fn duplicates_collapse_and_aliases_normalize() {
        let schema = SchemaDef::default_schema();
        let raw = "```\n- Person:Elise | feels | Emotion:Joy\n2. person : elise|FEELS|emotion:joy\n```\n\n\
                   Event:Interview | occurs-at | Location Type:Office";
        let (set, failures) = parse_prediction(raw, &schema);
        assert_eq!(failures, 0);
        assert_eq!(set.len(), 2);
        assert!(set
            .contains(&Triplet::parse_pair("event:interview", "occurs_at", "locationtype:office").unwrap()));
    }

    #[test]
    fn invalid_predicates_survive_parsing() {
        let schema = SchemaDef::default_schema();
        let (set, _) = parse_prediction("person:elise | admires | person:bob", &schema);
        assert_eq!(set.iter().next().unwrap().predicate, "admires");
    }
}
