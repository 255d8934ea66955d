//! Stratified k-fold splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::Corpus;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratifyBy {
    #[default]
    Domain,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// Corpus (time) order.
    pub retrieval_ids: Vec<String>,
    /// Corpus (time) order.
    pub test_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<Fold>,
    pub stratify_by: StratifyBy,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SplitPlan {
    /// Every fold partitions `ids`, and every id is tested exactly once.
    pub fn check_against(&self, corpus: &Corpus) -> Result<(), HarnessError> {
        let all: BTreeMap<&str, usize> = corpus.positions();
        let mut tested: BTreeMap<&str, usize> = BTreeMap::new();
        for (f, fold) in self.folds.iter().enumerate() {
            let mut seen = BTreeMap::new();
            for id in fold.retrieval_ids.iter().chain(&fold.test_ids) {
                if !all.contains_key(id.as_str()) {
                    return Err(HarnessError::Plan(format!("fold {f}: unknown instance `{id}`")));
                }
                if seen.insert(id.as_str(), ()).is_some() {
                    return Err(HarnessError::Plan(format!(
                        "fold {f}: `{id}` appears twice or in both retrieval and test"
                    )));
                }
            }
            if seen.len() != all.len() {
                return Err(HarnessError::Plan(format!(
                    "fold {f} covers {} of {} instances",
                    seen.len(),
                    all.len()
                )));
            }
            for id in &fold.test_ids {
                *tested.entry(id.as_str()).or_insert(0) += 1;
            }
        }
        if let Some((id, n)) = all
            .keys()
            .map(|id| (*id, tested.get(id).copied().unwrap_or(0)))
            .find(|(_, n)| *n != 1)
        {
            return Err(HarnessError::Plan(format!("`{id}` is tested {n} times")));
        }
        Ok(())
    }

    /// Per fold, test counts per stratum value.
    pub fn stratum_table(&self, corpus: &Corpus) -> Vec<BTreeMap<String, usize>> {
        self.folds
            .iter()
            .map(|fold| {
                let mut counts = BTreeMap::new();
                for id in &fold.test_ids {
                    if let Some(inst) = corpus.get(id) {
                        *counts
                            .entry(stratum_key(self.stratify_by, &inst.domain))
                            .or_insert(0) += 1;
                    }
                }
                counts
            })
            .collect()
    }
}

fn stratum_key(by: StratifyBy, domain: &str) -> String {
    match by {
        StratifyBy::Domain => domain.to_string(),
        StratifyBy::None => "all".to_string(),
    }
}

/// Shuffle each stratum with its own derived stream, concatenate the strata
/// in name order and deal the result round-robin into `folds` test sets.
pub fn make_splits(
    corpus: &Corpus,
    folds: usize,
    test_fraction: f64,
    stratify_by: StratifyBy,
    seed: u64,
) -> Result<SplitPlan, HarnessError> {
    let n = corpus.instances.len();
    if folds == 0 {
        return Err(HarnessError::Config("folds must be at least 1".into()));
    }
    if folds > n {
        return Err(HarnessError::Config(format!(
            "{folds} folds requested for {n} instances"
        )));
    }
    if (test_fraction * folds as f64 - 1.0).abs() > 1e-9 {
        return Err(HarnessError::Config(format!(
            "test_fraction {test_fraction} must equal 1/folds = {} so that every instance is tested once",
            1.0 / folds as f64
        )));
    }

    let mut strata: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for inst in &corpus.instances {
        strata
            .entry(stratum_key(stratify_by, &inst.domain))
            .or_default()
            .push(&inst.instance_id);
    }

    let mut warnings = Vec::new();
    let mut assignment: BTreeMap<&str, usize> = BTreeMap::new();
    let mut counter = 0usize;
    for (key, ids) in &mut strata {
        if ids.len() < folds {
            let msg = format!(
                "stratum `{key}` has {} instances for {folds} folds; some folds will not test it",
                ids.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let mut rng = seed::stream(seed, &["split", key]);
        ids.shuffle(&mut rng);
        for id in ids.iter() {
            assignment.insert(id, counter % folds);
            counter += 1;
        }
    }

    let folds = (0..folds)
        .map(|f| {
            let (test, retrieval): (Vec<&str>, Vec<&str>) = corpus
                .instances
                .iter()
                .map(|i| i.instance_id.as_str())
                .partition(|id| assignment[id] == f);
            Fold {
                retrieval_ids: retrieval.into_iter().map(str::to_string).collect(),
                test_ids: test.into_iter().map(str::to_string).collect(),
            }
        })
        .collect();

    Ok(SplitPlan {
        folds,
        stratify_by,
        seed,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Instance, SituationGraph};

    fn corpus(domains: &[&str]) -> Corpus {
        let instances = domains
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let id = format!("inst-{i:04}");
                Instance {
                    instance_id: id.clone(),
                    time_index: i as u64,
                    domain: d.to_string(),
                    artifacts: vec![],
                    gold: SituationGraph {
                        instance_id: id,
                        time_index: i as u64,
                        triplets: vec![],
                    },
                }
            })
            .collect();
        Corpus {
            persona: BTreeMap::new(),
            domains: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            schema_ref: String::new(),
            provenance: BTreeMap::new(),
            instances,
        }
    }

    #[test]
    fn seventy_five_into_five_folds() {
        let doms: Vec<&str> = (0..75).map(|i| ["a", "b", "c", "d"][(i * 7) % 4]).collect();
        let c = corpus(&doms);
        let plan = make_splits(&c, 5, 0.2, StratifyBy::Domain, 7).unwrap();
        plan.check_against(&c).unwrap();
        for fold in &plan.folds {
            assert_eq!(fold.test_ids.len(), 15);
            assert_eq!(fold.retrieval_ids.len(), 60);
        }
        assert_eq!(plan, make_splits(&c, 5, 0.2, StratifyBy::Domain, 7).unwrap());
        assert_ne!(plan, make_splits(&c, 5, 0.2, StratifyBy::Domain, 8).unwrap());
    }

    #[test]
    fn leave_one_out() {
        let c = corpus(&["a", "b", "c", "d", "a"]);
        let plan = make_splits(&c, 5, 0.2, StratifyBy::Domain, 1).unwrap();
        assert!(plan.folds.iter().all(|f| f.test_ids.len() == 1));
        plan.check_against(&c).unwrap();
        assert!(!plan.warnings.is_empty());
    }

    #[test]
    fn config_errors() {
        let c = corpus(&["a", "b", "c"]);
        assert!(matches!(
            make_splits(&c, 5, 0.2, StratifyBy::Domain, 1),
            Err(HarnessError::Config(_))
        ));
        assert!(matches!(
            make_splits(&c, 3, 0.2, StratifyBy::Domain, 1),
            Err(HarnessError::Config(_))
        ));
    }
}
