//! Aggregation of per-instance records and the summary table.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{InstanceRecord, Protocol, TaskMode};
use crate::metrics::{MetricRecord, Prf};

/// Metric names in table and report order.
pub const METRIC_NAMES: [&str; 17] = [
    "strict_precision",
    "strict_recall",
    "strict_f1",
    "soft_precision",
    "soft_recall",
    "soft_f1",
    "soft_latent_precision",
    "soft_latent_recall",
    "soft_latent_f1",
    "soft_surface_precision",
    "soft_surface_recall",
    "soft_surface_f1",
    "pvr",
    "gap_ls",
    "latent_f1_norm",
    "surface_f1_norm",
    "gap_norm",
];

/// Rows of the rendered table: (label, metric name).
pub const TABLE_ROWS: [(&str, &str); 9] = [
    ("Strict F1", "strict_f1"),
    ("Soft F1", "soft_f1"),
    ("PVR", "pvr"),
    ("Latent soft F1", "soft_latent_f1"),
    ("Surface soft F1", "soft_surface_f1"),
    ("Gap (surface - latent)", "gap_ls"),
    ("Latent F1*", "latent_f1_norm"),
    ("Surface F1*", "surface_f1_norm"),
    ("Gap*", "gap_norm"),
];

pub fn metric_values(r: &MetricRecord) -> [(&'static str, Option<f64>); 17] {
    let prf = |p: &Prf| [Some(p.precision), Some(p.recall), Some(p.f1)];
    let [a, b, c] = prf(&r.strict);
    let [d, e, f] = prf(&r.soft);
    let [g, h, i] = prf(&r.soft_latent);
    let [j, k, l] = prf(&r.soft_surface);
    let values = [
        a,
        b,
        c,
        d,
        e,
        f,
        g,
        h,
        i,
        j,
        k,
        l,
        Some(r.pvr),
        Some(r.gap_ls),
        r.latent_f1_norm,
        r.surface_f1_norm,
        r.gap_norm,
    ];
    let mut out = [("", None); 17];
    for (slot, (name, v)) in out.iter_mut().zip(METRIC_NAMES.iter().zip(values)) {
        *slot = (*name, v);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    /// Mean over all scored (fold, run, instance) records.
    pub mean: f64,
    /// Sample SD over the per-(fold, run) means.
    pub sd_fold_run: f64,
    /// Sample SD over instance records.
    pub sd_instance: f64,
    pub n: usize,
    pub n_fold_run: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_mode: Option<TaskMode>,
    pub n_scored: usize,
    pub n_errored: usize,
    /// Set when nothing could be scored; `metrics` is then empty.
    pub empty: bool,
    pub metrics: BTreeMap<String, Stat>,
    /// Corpus-level strict P/R/F1 from pooled counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub micro_strict: Option<Prf>,
}

impl Summary {
    pub fn aggregate(label: &str, records: &[InstanceRecord]) -> Summary {
        let scored: Vec<&InstanceRecord> = records.iter().filter(|r| r.metrics.is_some()).collect();
        let n_errored = records.len() - scored.len();
        let first = records.first();
        let mut summary = Summary {
            label: label.to_string(),
            protocol: first.map(|r| r.protocol),
            task_mode: first.map(|r| r.task_mode),
            n_scored: scored.len(),
            n_errored,
            empty: scored.is_empty(),
            metrics: BTreeMap::new(),
            micro_strict: None,
        };
        if scored.is_empty() {
            return summary;
        }

        let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut by_fold_run: BTreeMap<(usize, u32), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
        for r in &scored {
            let m = r.metrics.as_ref().expect("filtered");
            for (name, v) in metric_values(m) {
                if let Some(v) = v {
                    values.entry(name).or_default().push(v);
                    by_fold_run
                        .entry((r.fold, r.run))
                        .or_default()
                        .entry(name)
                        .or_default()
                        .push(v);
                }
            }
        }
        for (name, xs) in &values {
            let group_means: Vec<f64> = by_fold_run
                .values()
                .filter_map(|g| g.get(name).map(|v| mean(v)))
                .collect();
            summary.metrics.insert(
                name.to_string(),
                Stat {
                    mean: mean(xs),
                    sd_fold_run: sample_sd(&group_means),
                    sd_instance: sample_sd(xs),
                    n: xs.len(),
                    n_fold_run: group_means.len(),
                },
            );
        }

        let tp: usize = scored.iter().map(|r| r.strict_tp).sum();
        let n_pred: usize = scored.iter().map(|r| r.n_pred).sum();
        let n_gold: usize = scored.iter().map(|r| r.n_gold).sum();
        summary.micro_strict = Some(Prf::from_counts(tp as f64, n_pred, n_gold));
        summary
    }

    /// A summary built from published or externally computed means. The
    /// gap is derived from the latent and surface F1 when not given.
    pub fn from_means(label: &str, means: &[(&str, f64)]) -> Summary {
        let stat = |m: f64| Stat {
            mean: m,
            sd_fold_run: 0.0,
            sd_instance: 0.0,
            n: 0,
            n_fold_run: 0,
        };
        let mut metrics: BTreeMap<String, Stat> =
            means.iter().map(|(k, v)| (k.to_string(), stat(*v))).collect();
        if !metrics.contains_key("gap_ls") {
            if let (Some(s), Some(l)) = (metrics.get("soft_surface_f1"), metrics.get("soft_latent_f1")) {
                let gap = s.mean - l.mean;
                metrics.insert("gap_ls".into(), stat(gap));
            }
        }
        Summary {
            label: label.to_string(),
            protocol: None,
            task_mode: None,
            n_scored: 0,
            n_errored: 0,
            empty: metrics.is_empty(),
            metrics,
            micro_strict: None,
        }
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|s| s.mean)
    }
}

/// `after - before` for every metric present in both.
pub fn deltas(before: &Summary, after: &Summary) -> BTreeMap<String, f64> {
    before
        .metrics
        .iter()
        .filter_map(|(k, b)| after.metrics.get(k).map(|a| (k.clone(), a.mean - b.mean)))
        .collect()
}

/// Plain-text table: one column per summary (mean ± fold/run SD) and, for
/// exactly two summaries, a Δ column holding second minus first.
pub fn render_table(summaries: &[Summary]) -> String {
    let width = 24;
    let col = 18;
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "Metric");
    for s in summaries {
        let _ = write!(out, "{:>col$}", s.label);
    }
    let delta = if summaries.len() == 2 {
        Some(deltas(&summaries[0], &summaries[1]))
    } else {
        None
    };
    if delta.is_some() {
        let _ = write!(out, "{:>10}", "Δ");
    }
    out.push('\n');

    for (label, key) in TABLE_ROWS {
        let _ = write!(out, "{label:<width$}");
        for s in summaries {
            let cell = if s.empty {
                "(no scored records)".to_string()
            } else {
                match s.metrics.get(key) {
                    Some(st) => format!("{:.3} ± {:.3}", st.mean, st.sd_fold_run),
                    None => "n/a".to_string(),
                }
            };
            let _ = write!(out, "{cell:>col$}");
        }
        if let Some(d) = &delta {
            let cell = d.get(key).map_or("n/a".to_string(), |v| format!("{v:+.3}"));
            let _ = write!(out, "{cell:>10}");
        }
        out.push('\n');
    }
    for s in summaries {
        if s.n_errored > 0 || s.empty {
            let _ = writeln!(out, "{}: {} scored, {} errored", s.label, s.n_scored, s.n_errored);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(fold: usize, run: u32, f1: f64) -> InstanceRecord {
        let prf = Prf::from_pr(f1, f1);
        InstanceRecord {
            fold,
            run,
            instance_id: format!("i{fold}{run}"),
            protocol: Protocol::ZeroShot,
            task_mode: TaskMode::Static,
            metrics: Some(MetricRecord {
                strict: prf,
                soft: prf,
                soft_latent: prf,
                soft_surface: prf,
                pvr: 0.0,
                gap_ls: 0.0,
                latent_f1_norm: None,
                surface_f1_norm: None,
                gap_norm: None,
            }),
            error: None,
            parse_failures: 0,
            n_pred: 1,
            n_gold: 1,
            strict_tp: 1,
            demo_ids: vec![],
            history_fallbacks: 0,
        }
    }

    #[test]
    fn single_record_has_zero_sd() {
        let s = Summary::aggregate("x", &[record(0, 0, 0.3)]);
        let st = s.metrics["strict_f1"];
        assert!((st.mean - 0.3).abs() < 1e-12);
        assert_eq!((st.sd_fold_run, st.sd_instance), (0.0, 0.0));
        assert!(!s.metrics.contains_key("latent_f1_norm"));
    }

    #[test]
    fn two_fold_run_means() {
        let s = Summary::aggregate("x", &[record(0, 0, 0.4), record(1, 0, 0.6)]);
        let st = s.metrics["strict_f1"];
        assert!((st.mean - 0.5).abs() < 1e-12);
        assert!((st.sd_fold_run - 0.1414).abs() < 1e-4);
    }

    #[test]
    fn all_errored_is_marked_empty() {
        let mut r = record(0, 0, 0.5);
        r.metrics = None;
        r.error = Some("boom".into());
        let s = Summary::aggregate("x", &[r]);
        assert!(s.empty);
        assert_eq!(s.n_errored, 1);
        assert!(render_table(&[s]).contains("no scored records"));
    }

    #[test]
    fn delta_column_is_difference_of_means() {
        let a = Summary::from_means("zero_shot", &[("strict_f1", 0.2)]);
        let b = Summary::from_means("ra_icl", &[("strict_f1", 0.5)]);
        assert!((deltas(&a, &b)["strict_f1"] - 0.3).abs() < 1e-12);
        let t = render_table(&[a.clone(), b]);
        assert!(t.contains("+0.300"));
        assert!(!render_table(&[a]).contains('Δ'));
    }
}
