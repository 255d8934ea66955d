//! Situation graph prediction toolkit.
//!
//! A typed situation-graph ontology with validation, a structure-first
//! synthetic corpus generator, pluggable predictor/embedder backends and an
//! evaluation harness computing strict, soft and entropy-normalized scores.
//!
//! The pipeline, end to end:
//!
//! 1. [`ontology`] loads a schema (node kinds, predicates, arity map).
//! 2. [`synthgen`] samples valid graphs and renders artifact bundles for them.
//! 3. [`decompose`] turns artifacts into a textual view for the predictor.
//! 4. [`harness`] splits the corpus, builds prompts (optionally with
//!    demonstrations from [`retrieval`]), calls a [`backends::Generator`],
//!    parses the output and scores it with [`metrics`].

pub mod backends;
pub mod corpus;
pub mod decompose;
pub mod harness;
pub mod metrics;
pub mod ontology;
pub mod retrieval;
pub mod seed;
pub mod synthgen;

pub use corpus::{Artifact, Corpus, Instance, Modality, Node, SituationGraph, Triplet};
pub use ontology::{SchemaDef, Stratum, Violation, ViolationKind};
