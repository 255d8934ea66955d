//! Prompt assembly. Sections appear in a fixed order: ontology, history,
//! demonstrations, query, output format.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::corpus::{SituationGraph, Triplet};
use crate::ontology::SchemaDef;

pub const OUTPUT_GRAMMAR: &str = "subject_kind:subject_name | predicate | object_kind:object_name";

/// A retrieved example: flattened bundle text and its gold triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub instance_id: String,
    pub bundle_text: String,
    pub triplets: BTreeSet<Triplet>,
}

fn write_triplets<'a>(out: &mut String, triplets: impl IntoIterator<Item = &'a Triplet>) {
    for t in triplets {
        out.push_str(&t.to_grammar_line());
        out.push('\n');
    }
}

pub fn schema_section(schema: &SchemaDef) -> String {
    let mut out = String::from("## Ontology\nNode kinds (stratum): allowed names\n");
    for kind in schema.kind_ids() {
        let stratum = schema.stratum_of(kind).map(|s| s.as_str()).unwrap_or("?");
        let names = schema.vocabulary(kind).unwrap_or_default().join(", ");
        let _ = writeln!(out, "- {kind} ({stratum}): {names}");
    }
    out.push_str("Predicates: allowed subject_kind -> object_kind pairs\n");
    for p in schema.predicate_ids() {
        let pairs: Vec<String> = schema
            .arity(p)
            .unwrap_or_default()
            .iter()
            .map(|(s, o)| format!("{s} -> {o}"))
            .collect();
        let latent = if schema.is_latent_predicate(p) {
            " [latent]"
        } else {
            ""
        };
        let _ = writeln!(out, "- {p}{latent}: {}", pairs.join("; "));
    }
    out
}

/// History graphs are written oldest first with their triplets sorted, so
/// gold and predicted histories with equal content render identically.
pub fn build_prompt(
    schema: &SchemaDef,
    query_text: &str,
    demonstrations: &[Demonstration],
    history: &[SituationGraph],
) -> String {
    let mut out = schema_section(schema);

    if !history.is_empty() {
        out.push_str("\n## History (oldest first)\n");
        for g in history {
            let _ = writeln!(out, "### t={} ({})", g.time_index, g.instance_id);
            write_triplets(&mut out, &g.triplet_set());
        }
    }

    if !demonstrations.is_empty() {
        out.push_str("\n## Demonstrations\n");
        for (i, d) in demonstrations.iter().enumerate() {
            let _ = writeln!(
                out,
                "### Example {}\nArtifacts:\n{}",
                i + 1,
                d.bundle_text.trim_end()
            );
            out.push_str("Triplets:\n");
            write_triplets(&mut out, &d.triplets);
        }
    }

    out.push_str("\n## Query\nArtifacts:\n");
    out.push_str(query_text.trim_end());
    out.push('\n');

    let _ = write!(
        out,
        "\n## Output format\nList the situation graph of the query, one triplet per line, exactly as\n{OUTPUT_GRAMMAR}\nusing only the kinds, names and predicates above. Output nothing else.\n"
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(id: &str, t: u64, lines: &[(&str, &str, &str)]) -> SituationGraph {
        SituationGraph {
            instance_id: id.into(),
            time_index: t,
            triplets: lines
                .iter()
                .map(|(s, p, o)| Triplet::parse_pair(s, p, o).unwrap())
                .collect(),
        }
    }

    #[test]
    fn zero_shot_static_has_schema_and_query_only() {
        let schema = SchemaDef::default_schema();
        let p = build_prompt(&schema, "[text | email | a]\nhello", &[], &[]);
        assert!(p.starts_with("## Ontology"));
        assert!(p.contains("## Query\nArtifacts:\n[text | email | a]\nhello\n"));
        assert!(!p.contains("## History"));
        assert!(!p.contains("## Demonstrations"));
        assert!(p.contains(OUTPUT_GRAMMAR));
        assert_eq!(p, build_prompt(&schema, "[text | email | a]\nhello", &[], &[]));
    }

    #[test]
    fn demonstrations_keep_rank_order() {
        let schema = SchemaDef::default_schema();
        let demos: Vec<Demonstration> = ["d2", "d0", "d1"]
            .iter()
            .map(|id| Demonstration {
                instance_id: id.to_string(),
                bundle_text: format!("bundle {id}"),
                triplets: BTreeSet::new(),
            })
            .collect();
        let p = build_prompt(&schema, "q", &demos, &[]);
        assert_eq!(p.matches("### Example ").count(), 3);
        let pos = |s: &str| p.find(s).unwrap();
        assert!(pos("bundle d2") < pos("bundle d0") && pos("bundle d0") < pos("bundle d1"));
    }

    #[test]
    fn history_is_oldest_first_and_order_insensitive() {
        let schema = SchemaDef::default_schema();
        let a = graph(
            "i1",
            1,
            &[
                ("person:elise", "feels", "emotion:joy"),
                ("event:wedding", "has_participant", "person:elise"),
            ],
        );
        let b = graph("i2", 2, &[("person:elise", "feels", "emotion:calm")]);
        let p = build_prompt(&schema, "q", &[], &[a.clone(), b]);
        assert!(p.find("### t=1 (i1)").unwrap() < p.find("### t=2 (i2)").unwrap());
        let mut a_rev = a.clone();
        a_rev.triplets.reverse();
        assert_eq!(
            build_prompt(&schema, "q", &[], &[a]),
            build_prompt(&schema, "q", &[], &[a_rev])
        );
    }
}
