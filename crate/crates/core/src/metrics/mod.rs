//! Evaluation metrics: strict and soft set F1, the predicate violation
//! rate, entropy-normalized F1 and the latent/surface gap.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{cosine, BackendError, Embedder};
use crate::corpus::{Corpus, Triplet};
use crate::ontology::{partition_latent_surface, SchemaDef, Stratum};

mod assignment;

pub use assignment::{assignment_mass, brute_force_max, max_weight_assignment};

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("entropy of an empty distribution is undefined")]
    EmptyDistribution,
    #[error("similarity threshold {0} is outside [0, 1]")]
    Threshold(f64),
    #[error("embedding failed: {0}")]
    Embedding(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }

    /// P = tp / n_pred, R = tp / n_gold, each 0 when its denominator is 0.
    pub fn from_counts(tp: f64, n_pred: usize, n_gold: usize) -> Self {
        let ratio = |den: usize| if den == 0 { 0.0 } else { tp / den as f64 };
        Prf::from_pr(ratio(n_pred), ratio(n_gold))
    }
}

pub fn strict_true_positives(pred: &BTreeSet<Triplet>, gold: &BTreeSet<Triplet>) -> usize {
    pred.intersection(gold).count()
}

pub fn strict_prf(pred: &BTreeSet<Triplet>, gold: &BTreeSet<Triplet>) -> Prf {
    Prf::from_counts(strict_true_positives(pred, gold) as f64, pred.len(), gold.len())
}

/// Precision/recall from a similarity matrix (rows = predictions, columns =
/// gold): entries below `tau` are zeroed and the optimal one-to-one
/// matching mass is the soft true-positive count.
pub fn soft_prf_from_matrix(sim: &[Vec<f64>], n_gold: usize, tau: f64) -> Prf {
    let n_pred = sim.len();
    if n_pred == 0 || n_gold == 0 {
        return Prf::default();
    }
    let w: Vec<Vec<f64>> = sim
        .iter()
        .map(|row| row.iter().map(|&s| if s < tau { 0.0 } else { s }).collect())
        .collect();
    let a = max_weight_assignment(&w);
    Prf::from_counts(assignment_mass(&w, &a), n_pred, n_gold)
}

/// Vectors for a fixed set of canonical texts, embedded in one batch.
struct TextVectors {
    vectors: HashMap<String, Vec<f64>>,
}

impl TextVectors {
    fn embed<'a>(
        embedder: &dyn Embedder,
        triplets: impl IntoIterator<Item = &'a Triplet>,
    ) -> Result<Self, BackendError> {
        let texts: Vec<String> = triplets
            .into_iter()
            .map(Triplet::canonical_text)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if texts.is_empty() {
            return Ok(TextVectors {
                vectors: HashMap::new(),
            });
        }
        let rows = embedder.embed(&texts)?;
        if rows.len() != texts.len() {
            return Err(BackendError::ResponseShape(format!(
                "{} embeddings for {} texts",
                rows.len(),
                texts.len()
            )));
        }
        Ok(TextVectors {
            vectors: texts.into_iter().zip(rows).collect(),
        })
    }

    /// Equal canonical texts score exactly 1; otherwise cosine clamped to [0, 1].
    fn similarity(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        cosine(&self.vectors[a], &self.vectors[b]).clamp(0.0, 1.0)
    }

    fn prf(&self, pred: &BTreeSet<Triplet>, gold: &BTreeSet<Triplet>, tau: f64) -> Prf {
        // BTreeSet iteration is sorted by node and predicate, which fixes
        // row/column order and therefore tie-breaking.
        let gold_texts: Vec<String> = gold.iter().map(Triplet::canonical_text).collect();
        let sim: Vec<Vec<f64>> = pred
            .iter()
            .map(|p| {
                let pt = p.canonical_text();
                gold_texts.iter().map(|g| self.similarity(&pt, g)).collect()
            })
            .collect();
        soft_prf_from_matrix(&sim, gold.len(), tau)
    }
}

fn check_tau(tau: f64) -> Result<(), MetricError> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(MetricError::Threshold(tau))
    }
}

pub fn soft_prf(
    pred: &BTreeSet<Triplet>,
    gold: &BTreeSet<Triplet>,
    embedder: &dyn Embedder,
    tau: f64,
) -> Result<Prf, MetricError> {
    check_tau(tau)?;
    if pred.is_empty() || gold.is_empty() {
        return Ok(Prf::default());
    }
    let vectors = TextVectors::embed(embedder, pred.iter().chain(gold))?;
    Ok(vectors.prf(pred, gold, tau))
}

/// Number of predicted triplets whose predicate is undeclared or whose
/// (subject kind, object kind) pair is not in the predicate's arity.
pub fn predicate_violations(pred: &BTreeSet<Triplet>, schema: &SchemaDef) -> usize {
    pred.iter()
        .filter(|t| {
            !schema.has_predicate(&t.predicate)
                || !schema.arity_allows(&t.predicate, &t.subject.kind, &t.object.kind)
        })
        .count()
}

pub fn pvr(pred: &BTreeSet<Triplet>, schema: &SchemaDef) -> f64 {
    if pred.is_empty() {
        0.0
    } else {
        predicate_violations(pred, schema) as f64 / pred.len() as f64
    }
}

/// Shannon entropy in bits.
pub fn shannon_entropy<K>(counts: &BTreeMap<K, usize>) -> Result<f64, MetricError> {
    let total: usize = counts.values().sum();
    if total == 0 {
        return Err(MetricError::EmptyDistribution);
    }
    let total = total as f64;
    let h: f64 = counts
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    Ok(h.max(0.0))
}

/// `f1 * h_cat / h_surf`, or `None` when `h_surf` is zero.
pub fn entropy_normalized_f1(f1: f64, h_cat: f64, h_surf: f64) -> Option<f64> {
    if h_surf > 0.0 {
        Some(f1 * (h_cat / h_surf))
    } else {
        None
    }
}

pub fn latent_surface_gap(surface_f1: f64, latent_f1: f64) -> f64 {
    surface_f1 - latent_f1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    /// Pooled object-value frequencies over the gold graphs.
    #[default]
    Empirical,
    /// Uniform over the pooled vocabularies of each category.
    UniformVocabulary,
    /// Mean of per-kind empirical entropies within each category.
    PerKind,
}

/// Entropies of the latent (psychological object values) and surface
/// (all other object values) categories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyContext {
    pub mode: EntropyMode,
    pub h_latent: f64,
    pub h_surface: f64,
}

type CategoryCounts = BTreeMap<String, BTreeMap<String, usize>>;

fn object_counts(schema: &SchemaDef, corpus: &Corpus) -> (CategoryCounts, CategoryCounts) {
    let mut latent: CategoryCounts = BTreeMap::new();
    let mut surface: CategoryCounts = BTreeMap::new();
    for inst in &corpus.instances {
        for t in &inst.gold.triplets {
            let o = &t.object;
            let bucket = if schema.stratum_of(&o.kind) == Some(Stratum::Psychological) {
                &mut latent
            } else {
                &mut surface
            };
            *bucket
                .entry(o.kind.clone())
                .or_default()
                .entry(o.name.clone())
                .or_insert(0) += 1;
        }
    }
    (latent, surface)
}

fn pooled(counts: &CategoryCounts) -> BTreeMap<String, usize> {
    counts
        .iter()
        .flat_map(|(kind, values)| values.iter().map(move |(name, c)| (format!("{kind}:{name}"), *c)))
        .collect()
}

fn entropy_or_zero(counts: &BTreeMap<String, usize>) -> f64 {
    shannon_entropy(counts).unwrap_or(0.0)
}

fn per_kind(counts: &CategoryCounts) -> f64 {
    let hs: Vec<f64> = counts.values().map(entropy_or_zero).collect();
    if hs.is_empty() {
        0.0
    } else {
        hs.iter().sum::<f64>() / hs.len() as f64
    }
}

impl EntropyContext {
    pub fn new(h_latent: f64, h_surface: f64) -> Self {
        EntropyContext {
            mode: EntropyMode::Empirical,
            h_latent,
            h_surface,
        }
    }

    /// Uniform over the vocabularies: log2 of the pooled value count.
    pub fn uniform(schema: &SchemaDef) -> Self {
        let mut n_latent = 0usize;
        let mut n_surface = 0usize;
        for kind in schema.kind_ids() {
            let n = schema.vocabulary(kind).map_or(0, <[String]>::len);
            if schema.stratum_of(kind) == Some(Stratum::Psychological) {
                n_latent += n;
            } else {
                n_surface += n;
            }
        }
        let log2 = |n: usize| if n == 0 { 0.0 } else { (n as f64).log2() };
        EntropyContext {
            mode: EntropyMode::UniformVocabulary,
            h_latent: log2(n_latent),
            h_surface: log2(n_surface),
        }
    }

    pub fn from_corpus(schema: &SchemaDef, corpus: &Corpus, mode: EntropyMode) -> Self {
        if mode == EntropyMode::UniformVocabulary {
            return EntropyContext::uniform(schema);
        }
        let (latent, surface) = object_counts(schema, corpus);
        let (h_latent, h_surface) = match mode {
            EntropyMode::PerKind => (per_kind(&latent), per_kind(&surface)),
            _ => (
                entropy_or_zero(&pooled(&latent)),
                entropy_or_zero(&pooled(&surface)),
            ),
        };
        EntropyContext {
            mode,
            h_latent,
            h_surface,
        }
    }
}

/// All metrics for one (prediction, gold) pair. Normalized values are
/// `None` when the surface entropy is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub strict: Prf,
    pub soft: Prf,
    pub soft_latent: Prf,
    pub soft_surface: Prf,
    pub pvr: f64,
    pub gap_ls: f64,
    pub latent_f1_norm: Option<f64>,
    pub surface_f1_norm: Option<f64>,
    pub gap_norm: Option<f64>,
}

pub fn score_instance(
    pred: &BTreeSet<Triplet>,
    gold: &BTreeSet<Triplet>,
    schema: &SchemaDef,
    embedder: &dyn Embedder,
    tau: f64,
    entropy: &EntropyContext,
) -> Result<MetricRecord, MetricError> {
    check_tau(tau)?;
    let vectors = if pred.is_empty() || gold.is_empty() {
        TextVectors {
            vectors: HashMap::new(),
        }
    } else {
        TextVectors::embed(embedder, pred.iter().chain(gold))?
    };
    let (pred_lat, pred_surf) = partition_latent_surface(schema, pred);
    let (gold_lat, gold_surf) = partition_latent_surface(schema, gold);

    let soft_latent = vectors.prf(&pred_lat, &gold_lat, tau);
    let soft_surface = vectors.prf(&pred_surf, &gold_surf, tau);
    let latent_f1_norm = entropy_normalized_f1(soft_latent.f1, entropy.h_latent, entropy.h_surface);
    let surface_f1_norm = entropy_normalized_f1(soft_surface.f1, entropy.h_surface, entropy.h_surface);
    let gap_norm = match (surface_f1_norm, latent_f1_norm) {
        (Some(s), Some(l)) => Some(s - l),
        _ => None,
    };
    Ok(MetricRecord {
        strict: strict_prf(pred, gold),
        soft: vectors.prf(pred, gold, tau),
        soft_latent,
        soft_surface,
        pvr: pvr(pred, schema),
        gap_ls: latent_surface_gap(soft_surface.f1, soft_latent.f1),
        latent_f1_norm,
        surface_f1_norm,
        gap_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{HashingEmbedder, IndicatorEmbedder};
    use proptest::prelude::*;

    fn t(s: &str, p: &str, o: &str) -> Triplet {
        Triplet::parse_pair(s, p, o).unwrap()
    }

    fn gold() -> BTreeSet<Triplet> {
        [
            t("Event:Interview", "occurs_at", "LocationType:Office"),
            t("Event:Interview", "has_participant", "Person:Elise"),
            t("Person:Elise", "feels", "Emotion:Stressed"),
            t("Emotion:Stressed", "has_valence", "Valence:Negative"),
        ]
        .into_iter()
        .collect()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn strict_examples() {
        let g = gold();
        let p = strict_prf(&g, &g);
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));

        let mut pred: BTreeSet<Triplet> = g.iter().take(2).cloned().collect();
        pred.insert(t("Event:Interview", "occurs_during", "TimeOfDay:Morning"));
        let p = strict_prf(&pred, &g);
        assert!(close(p.precision, 2.0 / 3.0));
        assert!(close(p.recall, 0.5));
        assert!(close(p.f1, 4.0 / 7.0));

        let p = strict_prf(&BTreeSet::new(), &g);
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn soft_matrix_example() {
        let p = soft_prf_from_matrix(&[vec![0.9, 0.2], vec![0.3, 0.8]], 2, 0.5);
        assert!(close(p.precision, 0.85) && close(p.recall, 0.85) && close(p.f1, 0.85));
        let p = soft_prf_from_matrix(&[vec![0.4, 0.2], vec![0.3, 0.1]], 2, 0.5);
        assert_eq!(p.f1, 0.0);
    }

    #[test]
    fn soft_identity_is_exact() {
        let g = gold();
        let p = soft_prf(&g, &g, &HashingEmbedder::default(), DEFAULT_TAU).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn pvr_examples() {
        let schema = SchemaDef::default_schema();
        let mut pred = BTreeSet::new();
        for name in [
            "bob", "maria", "daniel", "priya", "marco", "aiko", "liam", "sofia",
        ] {
            pred.insert(t("Person:Elise", "interacts_with", &format!("Person:{name}")));
        }
        let valid_only = pred.clone();
        pred.insert(t("Person:Elise", "admires", "Person:Bob"));
        pred.insert(t("Person:Elise", "resents", "Person:Bob"));
        assert_eq!(pred.len(), 10);
        assert!(close(pvr(&pred, &schema), 0.2));
        assert_eq!(pvr(&valid_only, &schema), 0.0);
        assert_eq!(pvr(&BTreeSet::new(), &schema), 0.0);
    }

    #[test]
    fn entropy_examples() {
        let uniform = |n: usize| -> BTreeMap<usize, usize> { (0..n).map(|i| (i, 1)).collect() };
        assert!(close(shannon_entropy(&uniform(8)).unwrap(), 3.0));
        assert!((shannon_entropy(&uniform(106)).unwrap() - 6.7279).abs() < 1e-4);
        assert_eq!(shannon_entropy(&uniform(1)).unwrap(), 0.0);
        assert!(shannon_entropy(&BTreeMap::<u8, usize>::new()).is_err());

        let f = entropy_normalized_f1(0.5, 3.0, 106f64.log2()).unwrap();
        assert!((f - 0.22295).abs() < 1e-4);
        assert_eq!(entropy_normalized_f1(0.7, 2.0, 2.0), Some(0.7));
        assert_eq!(entropy_normalized_f1(0.0, 3.0, 6.0), Some(0.0));
        assert_eq!(entropy_normalized_f1(0.5, 3.0, 0.0), None);
    }

    #[test]
    fn uniform_context_matches_vocabulary_sizes() {
        let ctx = EntropyContext::uniform(&SchemaDef::default_schema());
        assert!(close(ctx.h_latent, 3.0));
        assert!((ctx.h_surface - 6.7279).abs() < 1e-4);
    }

    #[test]
    fn gap_examples() {
        assert!((latent_surface_gap(0.464, 0.351) - 0.113).abs() < 1e-12);
        assert_eq!(latent_surface_gap(0.3, 0.3), 0.0);
        assert!((latent_surface_gap(0.143, 0.145) + 0.002).abs() < 1e-12);
    }

    #[test]
    fn score_instance_compositions() {
        let schema = SchemaDef::default_schema();
        let emb = HashingEmbedder::default();
        let ctx = EntropyContext::uniform(&schema);
        let g = gold();
        let r = score_instance(&g, &g, &schema, &emb, DEFAULT_TAU, &ctx).unwrap();
        assert_eq!(r.strict.f1, 1.0);
        assert_eq!(r.soft.f1, 1.0);
        assert_eq!(r.pvr, 0.0);
        assert_eq!(r.gap_ls, 0.0);

        let (_, surface) = partition_latent_surface(&schema, &g);
        let r = score_instance(&surface, &g, &schema, &emb, DEFAULT_TAU, &ctx).unwrap();
        assert_eq!(r.soft_latent.recall, 0.0);
        assert!(r.gap_ls > 0.0);
        assert_eq!(r.gap_ls, r.soft_surface.f1);
    }

    fn arb_triplet() -> impl Strategy<Value = Triplet> {
        let schema = SchemaDef::default_schema();
        let kinds: Vec<String> = schema.kind_ids().to_vec();
        let mut preds: Vec<String> = schema.predicate_ids().to_vec();
        preds.push("admires".into());
        (
            0..kinds.len(),
            0..3usize,
            0..preds.len(),
            0..kinds.len(),
            0..3usize,
        )
            .prop_map(move |(sk, sn, p, ok, on)| {
                let name = |k: &str, i: usize| {
                    let v = schema.vocabulary(k).unwrap();
                    v[i % v.len()].clone()
                };
                Triplet::from_parts(
                    &kinds[sk],
                    &name(&kinds[sk], sn),
                    &preds[p],
                    &kinds[ok],
                    &name(&kinds[ok], on),
                )
            })
    }

    fn arb_set() -> impl Strategy<Value = BTreeSet<Triplet>> {
        proptest::collection::btree_set(arb_triplet(), 0..12)
    }

    proptest! {
        #[test]
        fn strict_symmetry(pred in arb_set(), gold in arb_set()) {
            prop_assert_eq!(strict_prf(&pred, &gold).precision, strict_prf(&gold, &pred).recall);
        }

        #[test]
        fn strict_monotonicity(pred in arb_set(), gold in arb_set(), extra in arb_triplet()) {
            let base = strict_prf(&pred, &gold);
            let mut grown = pred.clone();
            if grown.insert(extra.clone()) {
                let after = strict_prf(&grown, &gold);
                if gold.contains(&extra) {
                    prop_assert!(after.recall >= base.recall);
                } else {
                    prop_assert!(after.precision <= base.precision);
                }
            }
        }

        #[test]
        fn indicator_soft_equals_strict(pred in arb_set(), gold in arb_set()) {
            let emb = IndicatorEmbedder::new(4096);
            let soft = soft_prf(&pred, &gold, &emb, DEFAULT_TAU).unwrap();
            let strict = strict_prf(&pred, &gold);
            prop_assert!((soft.f1 - strict.f1).abs() < 1e-9);
            prop_assert!((soft.precision - strict.precision).abs() < 1e-9);
            prop_assert!((soft.recall - strict.recall).abs() < 1e-9);
        }

        #[test]
        fn record_ranges(pred in arb_set(), gold in arb_set(), tau in 0.0f64..=1.0) {
            let schema = SchemaDef::default_schema();
            let ctx = EntropyContext::uniform(&schema);
            let r = score_instance(&pred, &gold, &schema, &HashingEmbedder::default(), tau, &ctx).unwrap();
            for p in [r.strict, r.soft, r.soft_latent, r.soft_surface] {
                for v in [p.precision, p.recall, p.f1] {
                    prop_assert!((0.0..=1.0).contains(&v), "{v}");
                }
            }
            prop_assert!((0.0..=1.0).contains(&r.pvr));
            prop_assert!((-1.0..=1.0).contains(&r.gap_ls));
            prop_assert_eq!(r.gap_ls, r.soft_surface.f1 - r.soft_latent.f1);
        }

        #[test]
        fn assignment_matches_brute_force(
            rows in 1usize..=6,
            cols in 1usize..=6,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let a = max_weight_assignment(&m);
            prop_assert_eq!(assignment_mass(&m, &a), brute_force_max(&m));
        }
    }
}
