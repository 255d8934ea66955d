//! Oracle and noisy-oracle predictors.
//!
//! Both hold a gold table built from a corpus and answer requests by
//! instance id. The noisy oracle perturbs gold with independent knobs:
//! drops (recall), same-kind object corruption (accuracy) and hallucinated
//! lines (validity), and logs what it actually did per call.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BackendError, BackendFingerprint, Capability, GenerationRequest, Generator};
use crate::corpus::{Corpus, Node, Triplet};
use crate::ontology::SchemaDef;
use crate::seed;

fn gold_table(corpus: &Corpus) -> HashMap<String, BTreeSet<Triplet>> {
    corpus
        .instances
        .iter()
        .map(|i| (i.instance_id.clone(), i.gold.triplet_set()))
        .collect()
}

fn lookup<'a>(
    table: &'a HashMap<String, BTreeSet<Triplet>>,
    req: &GenerationRequest,
) -> Result<&'a BTreeSet<Triplet>, BackendError> {
    let id = req
        .instance_id
        .as_deref()
        .ok_or_else(|| BackendError::Invalid("oracle request carries no instance id".into()))?;
    table
        .get(id)
        .ok_or_else(|| BackendError::Invalid(format!("oracle has no gold graph for `{id}`")))
}

fn render_lines<'a>(triplets: impl IntoIterator<Item = &'a Triplet>) -> String {
    triplets
        .into_iter()
        .map(Triplet::to_grammar_line)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Returns the query instance's gold graph in the output grammar.
#[derive(Debug, Clone)]
pub struct OracleGenerator {
    gold: HashMap<String, BTreeSet<Triplet>>,
}

impl OracleGenerator {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        OracleGenerator {
            gold: gold_table(corpus),
        }
    }
}

impl Generator for OracleGenerator {
    fn fingerprint(&self) -> BackendFingerprint {
        BackendFingerprint::new(Capability::Generation, "offline", "oracle", &())
    }

    fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError> {
        Ok(render_lines(lookup(&self.gold, req)?))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoisyOracleConfig {
    pub drop_rate_surface: f64,
    pub drop_rate_latent: f64,
    pub corrupt_rate: f64,
    /// Per gold triplet, probability of emitting one extra hallucinated line.
    pub hallucinate_rate: f64,
    /// Probability that a hallucinated line carries an undeclared predicate
    /// (otherwise it is a schema-valid but wrong triplet).
    pub hallucinate_invalid_rate: f64,
    /// Count-based mode: make exactly this fraction of output lines carry an
    /// undeclared predicate. Replaces `hallucinate_rate` when set.
    pub exact_invalid_fraction: Option<f64>,
    pub seed: u64,
}

impl Default for NoisyOracleConfig {
    fn default() -> Self {
        NoisyOracleConfig {
            drop_rate_surface: 0.0,
            drop_rate_latent: 0.0,
            corrupt_rate: 0.0,
            hallucinate_rate: 0.0,
            hallucinate_invalid_rate: 1.0,
            exact_invalid_fraction: None,
            seed: 0,
        }
    }
}

impl NoisyOracleConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let rates = [
            ("drop_rate_surface", self.drop_rate_surface),
            ("drop_rate_latent", self.drop_rate_latent),
            ("corrupt_rate", self.corrupt_rate),
            ("hallucinate_rate", self.hallucinate_rate),
            ("hallucinate_invalid_rate", self.hallucinate_invalid_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(BackendError::Invalid(format!("{name} = {r} is outside [0, 1]")));
            }
        }
        if let Some(f) = self.exact_invalid_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(BackendError::Invalid(format!(
                    "exact_invalid_fraction = {f} must lie strictly between 0 and 1"
                )));
            }
        }
        Ok(())
    }
}

/// What the noisy oracle did for one (instance, run) call.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionLog {
    pub gold: usize,
    pub dropped_surface: usize,
    pub dropped_latent: usize,
    pub corrupted: usize,
    pub hallucinated_valid: usize,
    pub hallucinated_invalid: usize,
    /// Distinct lines in the emitted output.
    pub emitted: usize,
}

pub struct NoisyOracle {
    schema: SchemaDef,
    gold: HashMap<String, BTreeSet<Triplet>>,
    cfg: NoisyOracleConfig,
    fake_predicates: Vec<String>,
    log: Mutex<BTreeMap<(String, u32), EmissionLog>>,
}

const FAKE_PREDICATES: [&str; 6] = [
    "admires",
    "resents",
    "dreams_about",
    "owns",
    "remembers",
    "avoids",
];

impl NoisyOracle {
    pub fn new(schema: &SchemaDef, corpus: &Corpus, cfg: NoisyOracleConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        let fake_predicates = FAKE_PREDICATES
            .iter()
            .map(|p| p.to_string())
            .filter(|p| !schema.has_predicate(p))
            .collect::<Vec<_>>();
        if fake_predicates.is_empty() {
            return Err(BackendError::Invalid(
                "every hallucination predicate is declared by the schema".into(),
            ));
        }
        Ok(NoisyOracle {
            schema: schema.clone(),
            gold: gold_table(corpus),
            cfg,
            fake_predicates,
            log: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn config(&self) -> &NoisyOracleConfig {
        &self.cfg
    }

    /// Realized emission counts keyed by (instance id, run).
    pub fn emission_log(&self) -> BTreeMap<(String, u32), EmissionLog> {
        self.log.lock().expect("emission log lock").clone()
    }

    fn random_valid(&self, rng: &mut ChaCha8Rng) -> Triplet {
        let preds = self.schema.predicate_ids();
        let p = &preds[seed::index(rng, preds.len())];
        let arity = self.schema.arity(p).expect("declared predicate");
        let (sk, ok) = &arity[seed::index(rng, arity.len())];
        Triplet::new(self.random_node(rng, sk), p, self.random_node(rng, ok))
    }

    fn random_node(&self, rng: &mut ChaCha8Rng, kind: &str) -> Node {
        let vocab = self.schema.vocabulary(kind).expect("declared kind");
        Node::new(kind, &vocab[seed::index(rng, vocab.len())])
    }

    fn random_invalid(&self, rng: &mut ChaCha8Rng) -> Triplet {
        let base = self.random_valid(rng);
        let fake = &self.fake_predicates[seed::index(rng, self.fake_predicates.len())];
        Triplet::new(base.subject, fake, base.object)
    }

    fn corrupt(&self, rng: &mut ChaCha8Rng, t: &Triplet) -> Option<Triplet> {
        let vocab = self.schema.vocabulary(&t.object.kind)?;
        let others: Vec<&String> = vocab.iter().filter(|n| **n != t.object.name).collect();
        if others.is_empty() {
            return None;
        }
        let name = others[seed::index(rng, others.len())];
        Some(Triplet::new(
            t.subject.clone(),
            &t.predicate,
            Node::new(&t.object.kind, name),
        ))
    }

    fn emit(&self, gold: &BTreeSet<Triplet>, rng: &mut ChaCha8Rng) -> (Vec<Triplet>, EmissionLog) {
        let mut log = EmissionLog {
            gold: gold.len(),
            ..Default::default()
        };
        let mut valid: Vec<Triplet> = Vec::new();
        let mut hallucinated: Vec<Triplet> = Vec::new();
        for t in gold {
            let latent = self.schema.is_latent(t);
            let drop = if latent {
                self.cfg.drop_rate_latent
            } else {
                self.cfg.drop_rate_surface
            };
            if rng.gen::<f64>() < drop {
                if latent {
                    log.dropped_latent += 1;
                } else {
                    log.dropped_surface += 1;
                }
            } else if rng.gen::<f64>() < self.cfg.corrupt_rate {
                match self.corrupt(rng, t) {
                    Some(c) => {
                        log.corrupted += 1;
                        valid.push(c);
                    }
                    None => valid.push(t.clone()),
                }
            } else {
                valid.push(t.clone());
            }
            if self.cfg.exact_invalid_fraction.is_none() && rng.gen::<f64>() < self.cfg.hallucinate_rate {
                if rng.gen::<f64>() < self.cfg.hallucinate_invalid_rate {
                    hallucinated.push(self.random_invalid(rng));
                } else {
                    hallucinated.push(self.random_valid(rng));
                }
            }
        }

        let mut seen = BTreeSet::new();
        valid.retain(|t| seen.insert(t.clone()));

        if let Some(fraction) = self.cfg.exact_invalid_fraction {
            let (keep, invalid) = exact_split(valid.len(), fraction);
            valid.truncate(keep);
            let mut lines = valid;
            let mut attempts = 0;
            while log.hallucinated_invalid < invalid && attempts < 10_000 {
                attempts += 1;
                let h = self.random_invalid(rng);
                if seen.insert(h.clone()) {
                    lines.push(h);
                    log.hallucinated_invalid += 1;
                }
            }
            log.emitted = lines.len();
            return (lines, log);
        }

        let mut lines = valid;
        for h in hallucinated {
            if seen.insert(h.clone()) {
                if self.schema.has_predicate(&h.predicate) {
                    log.hallucinated_valid += 1;
                } else {
                    log.hallucinated_invalid += 1;
                }
                lines.push(h);
            }
        }
        log.emitted = lines.len();
        (lines, log)
    }
}

/// For `available` valid lines and a target invalid fraction, pick
/// (valid lines to keep, invalid lines to add) so that
/// `invalid / (keep + invalid)` equals the fraction as exactly as possible,
/// preferring the largest output.
fn exact_split(available: usize, fraction: f64) -> (usize, usize) {
    let mut best: Option<(f64, usize, usize)> = None;
    for keep in (0..=available).rev() {
        // invalid = fraction * (keep + invalid)  =>  invalid = fraction * keep / (1 - fraction)
        let ideal = fraction * keep as f64 / (1.0 - fraction);
        let invalid = ideal.round() as usize;
        if keep + invalid == 0 {
            continue;
        }
        let err = (invalid as f64 / (keep + invalid) as f64 - fraction).abs();
        if err < 1e-12 {
            return (keep, invalid);
        }
        if best.is_none_or(|(e, _, _)| err < e - 1e-15) {
            best = Some((err, keep, invalid));
        }
    }
    best.map(|(_, k, i)| (k, i)).unwrap_or((0, 1))
}

impl Generator for NoisyOracle {
    fn fingerprint(&self) -> BackendFingerprint {
        BackendFingerprint::new(Capability::Generation, "offline", "noisy-oracle", &self.cfg)
    }

    fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError> {
        let gold = lookup(&self.gold, req)?;
        let id = req.instance_id.clone().unwrap_or_default();
        let run = req.run.to_string();
        let mut rng = seed::stream(self.cfg.seed, &["noisy-oracle", &id, &run]);
        let (lines, log) = self.emit(gold, &mut rng);
        self.log
            .lock()
            .expect("emission log lock")
            .insert((id, req.run), log);
        Ok(render_lines(&lines))
    }
}
