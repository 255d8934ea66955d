//! Experiment orchestration: splits, prompting protocols, temporal modes,
//! scoring and aggregation.
//!
//! Work is split into independent (fold, run) units, and within static and
//! oracle-history modes into independent instances. Every unit derives its
//! randomness from the configured seed and its own coordinates, and records
//! are sorted before aggregation, so the report does not depend on the
//! degree of parallelism.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendFingerprint, Embedder, GenerationRequest, Generator};
use crate::corpus::{Corpus, SituationGraph, Triplet};
use crate::decompose::Encoders;
use crate::metrics::{
    score_instance, strict_true_positives, EntropyContext, EntropyMode, MetricRecord, DEFAULT_TAU,
};
use crate::ontology::SchemaDef;
use crate::retrieval::{self, bundle_text, top_k, EmbeddingIndex, RetrievalError};
use crate::seed;

mod parse;
mod prompt;
mod report;
mod split;

pub use parse::parse_prediction;
pub use prompt::{build_prompt, schema_section, Demonstration, OUTPUT_GRAMMAR};
pub use report::{deltas, metric_values, render_table, sample_sd, Stat, Summary, METRIC_NAMES, TABLE_ROWS};
pub use split::{make_splits, Fold, SplitPlan, StratifyBy};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid split plan: {0}")]
    Plan(String),
    #[error("retrieval leak in fold {fold}: demonstration `{demo}` for `{instance}` is a test instance")]
    Leak {
        fold: usize,
        instance: String,
        demo: String,
    },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("report: {0}")]
    Report(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    ZeroShot,
    RaIcl,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::ZeroShot => "zero_shot",
            Protocol::RaIcl => "ra_icl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    #[default]
    Static,
    TemporalOracle,
    TemporalAutoregressive,
}

impl TaskMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskMode::Static => "static",
            TaskMode::TemporalOracle => "temporal_oracle",
            TaskMode::TemporalAutoregressive => "temporal_autoregressive",
        }
    }

    pub fn is_temporal(self) -> bool {
        self != TaskMode::Static
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    /// Demonstrations per query (ignored for zero-shot).
    pub k: usize,
    pub task_mode: TaskMode,
    /// History graphs per query in temporal modes.
    pub context_window: usize,
    pub runs_per_fold: u32,
    pub tau: f64,
    pub seed: u64,
    pub temperature: f64,
    /// When larger than `k`, each run draws its `k` demonstrations at
    /// random from this many top-ranked candidates. 0 means `k`.
    pub retrieval_pool: usize,
    pub entropy_mode: EntropyMode,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            protocol: Protocol::ZeroShot,
            k: 3,
            task_mode: TaskMode::Static,
            context_window: 2,
            runs_per_fold: 3,
            tau: DEFAULT_TAU,
            seed: 42,
            temperature: 0.0,
            retrieval_pool: 0,
            entropy_mode: EntropyMode::Empirical,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.protocol == Protocol::RaIcl && self.k == 0 {
            return bad("ra_icl needs k >= 1");
        }
        if self.task_mode.is_temporal() && self.context_window == 0 {
            return bad("temporal modes need context_window >= 1");
        }
        if self.runs_per_fold == 0 {
            return bad("runs_per_fold must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if self.retrieval_pool != 0 && self.retrieval_pool < self.k {
            return bad("retrieval_pool must be 0 or at least k");
        }
        Ok(())
    }

    fn effective_k(&self) -> usize {
        match self.protocol {
            Protocol::ZeroShot => 0,
            Protocol::RaIcl => self.k,
        }
    }

    fn pool(&self) -> usize {
        self.retrieval_pool.max(self.effective_k())
    }
}

/// Capability implementations used by a run.
#[derive(Clone)]
pub struct Backends {
    pub predictor: Arc<dyn Generator>,
    pub embedder: Arc<dyn Embedder>,
    pub encoders: Encoders,
}

impl Backends {
    pub fn fingerprints(&self) -> BTreeMap<String, BackendFingerprint> {
        let mut out = BTreeMap::new();
        out.insert("predictor".to_string(), self.predictor.fingerprint());
        out.insert("embedder".to_string(), self.embedder.fingerprint());
        if let Some(e) = &self.encoders.image {
            out.insert("image_encoder".to_string(), e.fingerprint());
        }
        if let Some(e) = &self.encoders.audio {
            out.insert("audio_encoder".to_string(), e.fingerprint());
        }
        out
    }
}

/// Execution knobs that never change results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    /// Cache file for bundle embeddings.
    pub index_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub fold: usize,
    pub run: u32,
    pub instance_id: String,
    pub protocol: Protocol,
    pub task_mode: TaskMode,
    /// `None` when the instance errored.
    pub metrics: Option<MetricRecord>,
    pub error: Option<String>,
    pub parse_failures: usize,
    pub n_pred: usize,
    pub n_gold: usize,
    pub strict_tp: usize,
    pub demo_ids: Vec<String>,
    /// History slots that used gold because no own prediction existed.
    pub history_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEcho {
    pub folds: usize,
    pub stratify_by: StratifyBy,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub protocol: ProtocolConfig,
    pub split: SplitEcho,
    pub schema_fingerprint: String,
    pub corpus_instances: usize,
    pub backends: BTreeMap<String, BackendFingerprint>,
    pub entropy: EntropyContext,
    /// Effective settings of the invoking tool, echoed verbatim.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub invocation: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ReportConfig,
    pub records: Vec<InstanceRecord>,
    pub aggregates: Summary,
}

impl EvalReport {
    /// Canonical pretty JSON (maps are ordered), newline-terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Report(e.to_string()))
    }

    pub fn label(&self) -> String {
        let c = &self.config.protocol;
        format!("{}/{}", c.protocol.as_str(), c.task_mode.as_str())
    }

    /// Recompute the summary from the stored records.
    pub fn summary(&self) -> Summary {
        Summary::aggregate(&self.label(), &self.records)
    }
}

struct Context<'a> {
    schema: &'a SchemaDef,
    corpus: &'a Corpus,
    cfg: &'a ProtocolConfig,
    backends: &'a Backends,
    entropy: EntropyContext,
    positions: BTreeMap<&'a str, usize>,
    texts: BTreeMap<String, Result<String, String>>,
    gold: BTreeMap<&'a str, BTreeSet<Triplet>>,
    /// Per fold: retrieval index (RA-ICL only) and test id set.
    indexes: Vec<Option<EmbeddingIndex>>,
    vectors: BTreeMap<String, Vec<f64>>,
    test_sets: Vec<BTreeSet<&'a str>>,
}

impl Context<'_> {
    fn errored(&self, fold: usize, run: u32, id: &str, error: String) -> InstanceRecord {
        InstanceRecord {
            fold,
            run,
            instance_id: id.to_string(),
            protocol: self.cfg.protocol,
            task_mode: self.cfg.task_mode,
            metrics: None,
            error: Some(error),
            parse_failures: 0,
            n_pred: 0,
            n_gold: self.gold[id].len(),
            strict_tp: 0,
            demo_ids: vec![],
            history_fallbacks: 0,
        }
    }

    fn demonstrations(
        &self,
        fold: usize,
        run: u32,
        id: &str,
    ) -> Result<Result<Vec<Demonstration>, String>, HarnessError> {
        let k = self.cfg.effective_k();
        if k == 0 {
            return Ok(Ok(vec![]));
        }
        let index = self.indexes[fold].as_ref().expect("index built for ra_icl");
        let Some(query) = self.vectors.get(id) else {
            return Ok(Err(format!("no bundle embedding for `{id}`")));
        };
        let mut ids = top_k(query, index, self.cfg.pool(), Some(id))?;
        if ids.len() > k {
            let rank: BTreeMap<String, usize> = ids.iter().enumerate().map(|(i, d)| (d.clone(), i)).collect();
            let mut rng = seed::stream(self.cfg.seed, &["demos", &fold.to_string(), &run.to_string(), id]);
            ids.shuffle(&mut rng);
            ids.truncate(k);
            ids.sort_by_key(|d| rank[d]);
        }
        if let Some(demo) = ids.iter().find(|d| self.test_sets[fold].contains(d.as_str())) {
            return Err(HarnessError::Leak {
                fold,
                instance: id.to_string(),
                demo: demo.clone(),
            });
        }
        Ok(Ok(ids
            .into_iter()
            .map(|d| Demonstration {
                bundle_text: self.texts[&d].clone().expect("indexed bundles decomposed"),
                triplets: self.gold[d.as_str()].clone(),
                instance_id: d,
            })
            .collect()))
    }

    /// History graphs (oldest first) for the instance at corpus position
    /// `pos`, and how many slots fell back to gold.
    fn history(&self, pos: usize, own: &BTreeMap<String, BTreeSet<Triplet>>) -> (Vec<SituationGraph>, usize) {
        if !self.cfg.task_mode.is_temporal() {
            return (vec![], 0);
        }
        let start = pos.saturating_sub(self.cfg.context_window);
        let mut fallbacks = 0;
        let graphs = self.corpus.instances[start..pos]
            .iter()
            .map(|inst| {
                let triplets = match self.cfg.task_mode {
                    TaskMode::TemporalAutoregressive => match own.get(&inst.instance_id) {
                        Some(pred) => pred.iter().cloned().collect(),
                        None => {
                            fallbacks += 1;
                            inst.gold.triplets.clone()
                        }
                    },
                    _ => inst.gold.triplets.clone(),
                };
                SituationGraph {
                    instance_id: inst.instance_id.clone(),
                    time_index: inst.time_index,
                    triplets,
                }
            })
            .collect();
        (graphs, fallbacks)
    }

    /// Predict and score one test instance. Returns the record and, when
    /// the predictor answered, the parsed prediction.
    fn score(
        &self,
        fold: usize,
        run: u32,
        id: &str,
        own: &BTreeMap<String, BTreeSet<Triplet>>,
    ) -> Result<(InstanceRecord, Option<BTreeSet<Triplet>>), HarnessError> {
        let text = match &self.texts[id] {
            Ok(t) => t,
            Err(e) => return Ok((self.errored(fold, run, id, e.clone()), None)),
        };
        let demos = match self.demonstrations(fold, run, id)? {
            Ok(d) => d,
            Err(e) => return Ok((self.errored(fold, run, id, e), None)),
        };
        let (history, history_fallbacks) = self.history(self.positions[id], own);
        let prompt = build_prompt(self.schema, text, &demos, &history);
        let req = GenerationRequest {
            prompt,
            instance_id: Some(id.to_string()),
            run,
            seed: seed::derive(
                self.cfg.seed,
                &["predict", &fold.to_string(), &run.to_string(), id],
            ),
            temperature: self.cfg.temperature,
        };
        let demo_ids: Vec<String> = demos.into_iter().map(|d| d.instance_id).collect();
        let raw = match self.backends.predictor.generate(&req) {
            Ok(raw) => raw,
            Err(e) => {
                let mut r = self.errored(fold, run, id, format!("predictor: {e}"));
                r.demo_ids = demo_ids;
                r.history_fallbacks = history_fallbacks;
                return Ok((r, None));
            }
        };
        let (pred, parse_failures) = parse_prediction(&raw, self.schema);
        let gold = &self.gold[id];
        let mut record = InstanceRecord {
            fold,
            run,
            instance_id: id.to_string(),
            protocol: self.cfg.protocol,
            task_mode: self.cfg.task_mode,
            metrics: None,
            error: None,
            parse_failures,
            n_pred: pred.len(),
            n_gold: gold.len(),
            strict_tp: strict_true_positives(&pred, gold),
            demo_ids,
            history_fallbacks,
        };
        match score_instance(
            &pred,
            gold,
            self.schema,
            self.backends.embedder.as_ref(),
            self.cfg.tau,
            &self.entropy,
        ) {
            Ok(m) => record.metrics = Some(m),
            Err(e) => record.error = Some(format!("scoring: {e}")),
        }
        Ok((record, Some(pred)))
    }

    fn fold_run(
        &self,
        fold: usize,
        run: u32,
        test_ids: &[String],
    ) -> Result<Vec<InstanceRecord>, HarnessError> {
        if self.cfg.task_mode == TaskMode::TemporalAutoregressive {
            // own predictions feed later prompts, so go in time order
            let mut own = BTreeMap::new();
            let mut out = Vec::with_capacity(test_ids.len());
            for id in test_ids {
                let (record, pred) = self.score(fold, run, id, &own)?;
                if let Some(pred) = pred {
                    own.insert(id.clone(), pred);
                }
                out.push(record);
            }
            Ok(out)
        } else {
            let none = BTreeMap::new();
            test_ids
                .par_iter()
                .map(|id| self.score(fold, run, id, &none).map(|(r, _)| r))
                .collect()
        }
    }
}

fn decompose_all(corpus: &Corpus, encoders: &Encoders) -> BTreeMap<String, Result<String, String>> {
    corpus
        .instances
        .par_iter()
        .map(|inst| {
            let text = bundle_text(&inst.artifacts, encoders).map_err(|e| format!("decomposition: {e}"));
            (inst.instance_id.clone(), text)
        })
        .collect()
}

fn embed_all(
    texts: &BTreeMap<String, Result<String, String>>,
    embedder: &dyn Embedder,
    cache: Option<&PathBuf>,
) -> Result<BTreeMap<String, Vec<f64>>, HarnessError> {
    let ok: BTreeMap<String, String> = texts
        .iter()
        .filter_map(|(id, t)| t.as_ref().ok().map(|t| (id.clone(), t.clone())))
        .collect();
    let fp = embedder.fingerprint();
    let mut vectors = match cache {
        Some(path) => retrieval::load_vector_cache(path, &fp, &ok),
        None => BTreeMap::new(),
    };
    let missing: Vec<(String, String)> = ok
        .iter()
        .filter(|(id, _)| !vectors.contains_key(*id))
        .map(|(id, t)| (id.clone(), t.clone()))
        .collect();
    if !missing.is_empty() {
        vectors.extend(retrieval::embed_texts(embedder, &missing)?);
        if let Some(path) = cache {
            retrieval::save_vector_cache(path, &fp, embedder.dimension(), &ok, &vectors)?;
        }
    }
    Ok(vectors)
}

pub fn run_experiment(
    schema: &SchemaDef,
    corpus: &Corpus,
    plan: &SplitPlan,
    cfg: &ProtocolConfig,
    backends: &Backends,
    opts: &RunOptions,
) -> Result<EvalReport, HarnessError> {
    cfg.validate()?;
    plan.check_against(corpus)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(schema, corpus, plan, cfg, backends, opts))
}

fn run_in_pool(
    schema: &SchemaDef,
    corpus: &Corpus,
    plan: &SplitPlan,
    cfg: &ProtocolConfig,
    backends: &Backends,
    opts: &RunOptions,
) -> Result<EvalReport, HarnessError> {
    let texts = decompose_all(corpus, &backends.encoders);
    let test_sets: Vec<BTreeSet<&str>> = plan
        .folds
        .iter()
        .map(|f| f.test_ids.iter().map(String::as_str).collect())
        .collect();

    let (vectors, indexes) = if cfg.protocol == Protocol::RaIcl {
        let vectors = embed_all(&texts, backends.embedder.as_ref(), opts.index_cache.as_ref())?;
        let mut indexes = Vec::with_capacity(plan.folds.len());
        for (f, fold) in plan.folds.iter().enumerate() {
            let ids = fold
                .retrieval_ids
                .iter()
                .map(String::as_str)
                .filter(|id| vectors.contains_key(*id));
            let index = EmbeddingIndex::from_vectors(backends.embedder.dimension(), ids, &vectors)?;
            if index.len() < cfg.pool() {
                return Err(HarnessError::Config(format!(
                    "fold {f} has {} retrievable instances, fewer than the {} demonstrations requested",
                    index.len(),
                    cfg.pool()
                )));
            }
            indexes.push(Some(index));
        }
        (vectors, indexes)
    } else {
        (BTreeMap::new(), vec![None; plan.folds.len()])
    };

    let ctx = Context {
        schema,
        corpus,
        cfg,
        backends,
        entropy: EntropyContext::from_corpus(schema, corpus, cfg.entropy_mode),
        positions: corpus.positions(),
        texts,
        gold: corpus
            .instances
            .iter()
            .map(|i| (i.instance_id.as_str(), i.gold.triplet_set()))
            .collect(),
        indexes,
        vectors,
        test_sets,
    };

    let effective_runs = if backends.predictor.is_deterministic() {
        1
    } else {
        cfg.runs_per_fold
    };
    let units: Vec<(usize, u32)> = (0..plan.folds.len())
        .flat_map(|f| (0..effective_runs).map(move |r| (f, r)))
        .collect();
    let computed: Vec<Vec<InstanceRecord>> = units
        .par_iter()
        .map(|&(f, r)| {
            let mut test_ids = plan.folds[f].test_ids.clone();
            test_ids.sort_by_key(|id| ctx.positions[id.as_str()]);
            ctx.fold_run(f, r, &test_ids)
        })
        .collect::<Result<_, _>>()?;

    let mut records: Vec<InstanceRecord> = computed.into_iter().flatten().collect();
    if effective_runs < cfg.runs_per_fold {
        let base = records.clone();
        for run in effective_runs..cfg.runs_per_fold {
            records.extend(base.iter().cloned().map(|mut r| {
                r.run = run;
                r
            }));
        }
    }
    records.sort_by(|a, b| {
        (a.fold, a.run, ctx.positions[a.instance_id.as_str()]).cmp(&(
            b.fold,
            b.run,
            ctx.positions[b.instance_id.as_str()],
        ))
    });

    let errored = records.iter().filter(|r| r.error.is_some()).count();
    if errored > 0 {
        log::warn!("{errored} of {} instance records errored", records.len());
    }

    let config = ReportConfig {
        protocol: cfg.clone(),
        split: SplitEcho {
            folds: plan.folds.len(),
            stratify_by: plan.stratify_by,
            seed: plan.seed,
        },
        schema_fingerprint: schema.fingerprint(),
        corpus_instances: corpus.instances.len(),
        backends: backends.fingerprints(),
        entropy: ctx.entropy,
        invocation: BTreeMap::new(),
    };
    let label = format!("{}/{}", cfg.protocol.as_str(), cfg.task_mode.as_str());
    let aggregates = Summary::aggregate(&label, &records);
    Ok(EvalReport {
        config,
        records,
        aggregates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{HashingEmbedder, OracleGenerator};
    use crate::synthgen::{default_persona, generate_corpus, GenConfig, TemplateRenderer};

    fn small_corpus(n: usize) -> (SchemaDef, Corpus) {
        let schema = SchemaDef::default_schema();
        let cfg = GenConfig {
            n_instances: n,
            ..Default::default()
        };
        let r = TemplateRenderer::with_default_cues(&schema).unwrap();
        let c = generate_corpus(&schema, &cfg, &default_persona(), &r).unwrap();
        (schema, c)
    }

    fn oracle(c: &Corpus) -> Backends {
        Backends {
            predictor: Arc::new(OracleGenerator::from_corpus(c)),
            embedder: Arc::new(HashingEmbedder::default()),
            encoders: Encoders::offline(),
        }
    }

    #[test]
    fn oracle_is_perfect_and_records_cover_runs() {
        let (schema, c) = small_corpus(20);
        let plan = make_splits(&c, 4, 0.25, StratifyBy::Domain, 3).unwrap();
        let cfg = ProtocolConfig {
            protocol: Protocol::RaIcl,
            ..Default::default()
        };
        let rep = run_experiment(&schema, &c, &plan, &cfg, &oracle(&c), &RunOptions::default()).unwrap();
        assert_eq!(rep.records.len(), 20 * 3);
        for r in &rep.records {
            let m = r.metrics.as_ref().unwrap();
            assert_eq!((m.strict.f1, m.soft.f1, m.pvr, m.gap_ls), (1.0, 1.0, 0.0, 0.0));
            assert_eq!(r.demo_ids.len(), 3);
        }
        assert_eq!(rep.summary(), rep.aggregates);
        assert_eq!(EvalReport::from_json(&rep.to_json()).unwrap(), rep);
    }

    #[test]
    fn ra_icl_needs_enough_retrieval_instances() {
        let (schema, c) = small_corpus(5);
        let plan = make_splits(&c, 5, 0.2, StratifyBy::Domain, 3).unwrap();
        let cfg = ProtocolConfig {
            protocol: Protocol::RaIcl,
            k: 5,
            ..Default::default()
        };
        assert!(matches!(
            run_experiment(&schema, &c, &plan, &cfg, &oracle(&c), &RunOptions::default()),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn ra_icl_demos_come_from_the_retrieval_split() {
        let (schema, c) = small_corpus(6);
        let plan = make_splits(&c, 6, 1.0 / 6.0, StratifyBy::Domain, 3).unwrap();
        let cfg = ProtocolConfig {
            protocol: Protocol::RaIcl,
            k: 3,
            runs_per_fold: 1,
            ..Default::default()
        };
        let rep = run_experiment(&schema, &c, &plan, &cfg, &oracle(&c), &RunOptions::default()).unwrap();
        for r in &rep.records {
            let fold = &plan.folds[r.fold];
            assert!(r.demo_ids.iter().all(|d| fold.retrieval_ids.contains(d)));
        }
    }

    #[test]
    fn a_leaking_plan_is_rejected_before_running() {
        let (schema, c) = small_corpus(6);
        let mut plan = make_splits(&c, 3, 1.0 / 3.0, StratifyBy::Domain, 3).unwrap();
        let leaked = plan.folds[0].test_ids[0].clone();
        plan.folds[0].retrieval_ids.push(leaked);
        let cfg = ProtocolConfig {
            protocol: Protocol::RaIcl,
            k: 1,
            ..Default::default()
        };
        assert!(matches!(
            run_experiment(&schema, &c, &plan, &cfg, &oracle(&c), &RunOptions::default()),
            Err(HarnessError::Plan(_))
        ));
    }

    #[test]
    fn oracle_autoregressive_matches_oracle_history() {
        let (schema, c) = small_corpus(12);
        let plan = make_splits(&c, 3, 1.0 / 3.0, StratifyBy::Domain, 5).unwrap();
        let base = ProtocolConfig {
            task_mode: TaskMode::TemporalOracle,
            runs_per_fold: 1,
            ..Default::default()
        };
        let ar = ProtocolConfig {
            task_mode: TaskMode::TemporalAutoregressive,
            ..base.clone()
        };
        let a = run_experiment(&schema, &c, &plan, &base, &oracle(&c), &RunOptions::default()).unwrap();
        let b = run_experiment(&schema, &c, &plan, &ar, &oracle(&c), &RunOptions::default()).unwrap();
        let strip = |r: &InstanceRecord| (r.instance_id.clone(), r.metrics.clone());
        assert_eq!(
            a.records.iter().map(strip).collect::<Vec<_>>(),
            b.records.iter().map(strip).collect::<Vec<_>>()
        );
        assert!(b.records.iter().any(|r| r.history_fallbacks > 0));
    }
}
